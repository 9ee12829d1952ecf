"""Compare the compiled and pure-Python kernel backends.

Runs each kernel on synthetic arrays with both backends in-process, then
times the full parse and shadow-execution stages on the loop workload in
subprocesses, once per backend (selected through TRACEKIT_PURE).

    python3 benchmarks/bench_kernels.py [--iterations 4000] [--repeat 3]
"""

from __future__ import annotations

import argparse
import json
import os
import random
import subprocess
import sys
import timeit
from array import array

from tracekit._kernels import _pure

try:
    from tracekit._kernels import _fast
except ImportError:
    _fast = None

STAGES = """
import json, sys, time
from tracekit._kernels import BACKEND
from tracekit.dataflow import CalldataRange, EnvOpcode, shadow_execute
from tracekit.oracle.corpus import loop_workload
from tracekit.parser import build_invocation_tree
gt = loop_workload({iterations})
best = {{"parse": 1e9, "shadow": 1e9}}
for _ in range({repeat}):
    t = time.perf_counter()
    tree = build_invocation_tree(gt.meta, gt.trace)
    best["parse"] = min(best["parse"], time.perf_counter() - t)
    t = time.perf_counter()
    shadow_execute(gt.meta, gt.trace, tree, [CalldataRange(0, 4, 32), EnvOpcode("CALLER")])
    best["shadow"] = min(best["shadow"], time.perf_counter() - t)
print(json.dumps({{"backend": BACKEND, "entries": len(gt.trace.entries), **best}}))
"""


def _inputs(n: int, seed: int = 7):
    rng = random.Random(seed)
    depths = array("i", [1])
    for _ in range(n - 1):
        depths.append(max(1, depths[-1] + rng.choice((-1, 0, 0, 0, 0, 1))))
    classes = array("B", (rng.choice((0, 0, 0, 0, 1, 2, 3)) for _ in range(n)))
    tags = array("I", (rng.choice((0, 0, 1, 2, 3)) for _ in range(n)))
    return depths, classes, tags


def bench_kernels(n: int, repeat: int) -> list[tuple[str, float, float | None]]:
    depths, classes, tags = _inputs(n)
    dst = array("I", bytes(4 * n))
    cases = {
        "depth_scan": lambda m: m.depth_scan(depths),
        "select_indices": lambda m: m.select_indices(classes, depths),
        "tags_fill(4096)": lambda m: [m.tags_fill(dst, i, 4096, 5) for i in range(0, n - 4096, 4096)],
        "tags_copy(4096)": lambda m: [m.tags_copy(dst, i, tags, i, 4096) for i in range(0, n - 4096, 4096)],
        "tags_distinct(32)": lambda m: [m.tags_distinct(tags, i, 32) for i in range(0, n - 32, 32)],
    }
    rows = []
    for name, fn in cases.items():
        pure = min(timeit.repeat(lambda: fn(_pure), number=1, repeat=repeat))
        fast = min(timeit.repeat(lambda: fn(_fast), number=1, repeat=repeat)) if _fast else None
        rows.append((name, pure, fast))
    return rows


def bench_stages(iterations: int, repeat: int) -> list[dict]:
    out = []
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("TRACEKIT_PURE", None)
        if pure:
            env["TRACEKIT_PURE"] = "1"
        code = STAGES.format(iterations=iterations, repeat=repeat)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        out.append(json.loads(res.stdout))
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iterations", type=int, default=4000, help="loop iterations (26 entries each)")
    ap.add_argument("--size", type=int, default=200_000, help="array length for kernel micro-benchmarks")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    print(f"kernels on {args.size} elements (best of {args.repeat}, seconds)")
    print(f"{'kernel':20} {'pure':>10} {'cython':>10} {'speedup':>8}")
    for name, pure, fast in bench_kernels(args.size, args.repeat):
        if fast is None:
            print(f"{name:20} {pure:10.4f} {'n/a':>10}")
        else:
            print(f"{name:20} {pure:10.4f} {fast:10.4f} {pure / fast:7.1f}x")

    print(f"\nstages on the loop workload ({args.iterations} iterations)")
    for row in bench_stages(args.iterations, args.repeat):
        print(f"{row['backend']:8} entries={row['entries']} parse={row['parse']:.3f}s shadow={row['shadow']:.3f}s")


if __name__ == "__main__":
    main()
