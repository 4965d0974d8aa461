"""Large synthetic traces for throughput measurement.

The trace is produced by the simulator, so it is semantically valid: a set
of workers repeatedly take a shared mutex and, nested inside it, a shared
RWMutex for reading, and hand an item to the main goroutine over their own unbuffered
channel; the main goroutine receives from each worker in turn. Every
operation completes, so analysis must walk the whole trace but produce no
findings.
"""

from __future__ import annotations

from .events import Trace
from .model import Body, Decl, Op, ProgramModel
from .simulator import RoundRobin, run



def synthetic_model(n_events: int, workers: int = 8) -> ProgramModel:
    """Model whose round-robin trace has roughly ``n_events`` events."""
    if workers < 1 or n_events < 1:
        raise ValueError("workers and n_events must be positive")
    # per round and worker: 6 lock events + 2 send + 2 recv (recv is main's)
    rounds = max(1, n_events // (10 * workers))
    objects = {"mu": Decl("mu", "mutex"), "rw": Decl("rw", "rwmutex")}
    main_ops = [Op("spawn", arg=w, line=1) for w in range(2, workers + 2)]
    worker_ops: dict[int, list[Op]] = {}
    for w in range(2, workers + 2):
        ch = f"c{w}"
        objects[ch] = Decl(ch, "chan", 0)
        line = 10 * w
        worker_ops[w] = [
            Op("lock", "mu", line=line), Op("rlock", "rw", line=line + 1),
            Op("runlock", "rw", line=line + 2), Op("unlock", "mu", line=line + 3),
            Op("send", ch, line=line + 4),
        ] * rounds
    main_ops += [Op("recv", f"c{w}", line=2) for w in range(2, workers + 2)] * rounds
    goroutines = {1: Body(1, "main", tuple(main_ops))}
    for w, ops in worker_ops.items():
        goroutines[w] = Body(w, f"worker{w}", tuple(ops))
    return ProgramModel(f"synthetic{n_events}", objects, goroutines, 1, "synthetic.model")


def synthetic_trace(n_events: int = 1_000_000, workers: int = 8) -> Trace:
    model = synthetic_model(n_events, workers)
    trace, _ = run(model, RoundRobin(), step_bound=10 * n_events + 1000)
    return trace
