"""Write a large synthetic trace file (simulator-produced, finding free).

    python3 scripts/gen_synthetic_trace.py -n 1000000 -o big.trace
"""

from __future__ import annotations

import argparse

from blocksleuth.synth import synthetic_trace
from blocksleuth.trace_io import save_trace


def main(argv: list[str] | None = None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("-n", "--events", type=int, default=1_000_000)
    p.add_argument("-w", "--workers", type=int, default=8)
    p.add_argument("-o", "--output", default="synthetic.trace")
    args = p.parse_args(argv)
    trace = synthetic_trace(args.events, args.workers)
    save_trace(trace, args.output)
    print(f"wrote {len(trace)} events to {args.output}")


if __name__ == "__main__":
    main()
