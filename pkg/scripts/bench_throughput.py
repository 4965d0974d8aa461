"""Time parsing and analysis of a synthetic trace.

    python3 scripts/bench_throughput.py -n 1000000
"""

from __future__ import annotations

import argparse
import time

from blocksleuth.analysis import analyze
from blocksleuth.synth import synthetic_trace
from blocksleuth.trace_io import parse_trace, write_trace


def main(argv: list[str] | None = None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("-n", "--events", type=int, default=1_000_000)
    p.add_argument("-w", "--workers", type=int, default=8)
    p.add_argument("--repeat", type=int, default=1)
    args = p.parse_args(argv)

    t0 = time.perf_counter()
    data = write_trace(synthetic_trace(args.events, args.workers))
    print(f"generated {len(data) / 1e6:.1f} MB in {time.perf_counter() - t0:.1f} s")
    for i in range(args.repeat):
        t0 = time.perf_counter()
        trace = parse_trace(data)
        t1 = time.perf_counter()
        result = analyze(trace)
        t2 = time.perf_counter()
        rate = len(trace) / (t2 - t0)
        print(f"run {i + 1}: {len(trace)} events, parse {t1 - t0:.2f} s, analyze {t2 - t1:.2f} s, "
              f"{rate / 1e3:.0f}k events/s, {len(result.findings)} findings")


if __name__ == "__main__":
    main()
