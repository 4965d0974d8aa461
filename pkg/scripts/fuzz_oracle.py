"""Cross-check predictors and detectors against the exhaustive oracle on fuzzed models.

For every generated model: if the oracle proves no interleaving deadlocks,
no deadlock finding may appear under any of the sampled schedules; and for
every run, the detector's blocked set must equal the simulator's.

    python3 scripts/fuzz_oracle.py --models 1000 --chaos 0.5
"""

from __future__ import annotations

import argparse
import sys
import time

from blocksleuth.analysis import Config, analyze
from blocksleuth.findings import DEADLOCK_KINDS
from blocksleuth.fuzz import FuzzConfig, random_model
from blocksleuth.model import format_model
from blocksleuth.oracle import enumerate_schedules
from blocksleuth.simulator import RoundRobin, SeededRandom, run


def main(argv: list[str] | None = None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--models", type=int, default=500)
    p.add_argument("--start", type=int, default=0, help="first seed")
    p.add_argument("--chaos", type=float, default=0.15)
    p.add_argument("--schedules", type=int, default=4, help="round-robin plus N-1 seeded schedules")
    p.add_argument("--no-hb-filter", action="store_true")
    p.add_argument("--show", action="store_true", help="print offending models")
    args = p.parse_args(argv)

    config = Config(hb_filter=not args.no_hb_filter)
    cfg = FuzzConfig(chaos=args.chaos)
    schedules = [RoundRobin()] + [SeededRandom(s) for s in range(args.schedules - 1)]
    free = false_pos = mismatch = 0
    start = time.perf_counter()
    for seed in range(args.start, args.start + args.models):
        m = random_model(seed, cfg)
        v = enumerate_schedules(m, strict=False)
        safe = v.complete and not v.deadlock_reachable
        free += safe
        flagged = False
        for s in schedules:
            trace, gt = run(m, s)
            r = analyze(trace, config)
            if r.blocked_goroutines(trace) != set(gt.blocked):
                mismatch += 1
                print(f"seed {seed}: detector/ground-truth mismatch under {s}")
            if safe and not flagged and any(f.kind in DEADLOCK_KINDS for f in r.findings):
                flagged = True
                false_pos += 1
                kinds = sorted({f.kind.value for f in r.findings if f.kind in DEADLOCK_KINDS})
                print(f"seed {seed}: deadlock-free model reported {kinds} under {s}")
                if args.show:
                    print(format_model(m))
    secs = time.perf_counter() - start
    print(f"{args.models} models, {free} deadlock free, {false_pos} false-positive models, "
          f"{mismatch} blocked-set mismatches, {secs:.1f} s")
    return 0 if not false_pos and not mismatch else 1


if __name__ == "__main__":
    sys.exit(main())
