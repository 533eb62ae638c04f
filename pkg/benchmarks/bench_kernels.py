"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import random
import timeit

from kphomog import _kernels_py

try:
    from kphomog import _kernels
except ImportError:
    _kernels = None

WORDS = [f"w{i}" for i in range(300)]


def workloads(rng):
    docs = [[rng.choice(WORDS) for _ in range(rng.randint(150, 250))] for _ in range(20)]
    edits = [(d, [w if rng.random() < 0.6 else rng.choice(WORDS) for w in d]) for d in docs]
    needles = [[rng.choice(WORDS) for _ in range(rng.randint(1, 4))] for _ in range(500)]
    return edits, needles, docs


def run_edit(module, edits, needles, docs):
    for a, b in edits:
        module.edit_distance(a, b)


def run_contains(module, edits, needles, docs):
    for needle in needles:
        for doc in docs:
            module.contains_run(needle, doc)


KERNELS = [("edit_distance", run_edit), ("contains_run", run_contains)]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    data = workloads(random.Random(0))
    backends = [("pure-python", _kernels_py)]
    if _kernels is not None:
        backends.append(("compiled", _kernels))
    else:
        print("compiled extension not built; timing the fallback only")
    for kernel, fn in KERNELS:
        timings = {}
        for name, module in backends:
            timings[name] = min(timeit.repeat(lambda: fn(module, *data), number=1, repeat=args.repeat))
            print(f"{kernel:14s} {name:12s} {timings[name] * 1e3:9.1f} ms")
        if len(timings) == 2:
            print(f"{kernel:14s} {'speed-up':12s} {timings['pure-python'] / timings['compiled']:9.1f}x")


if __name__ == "__main__":
    main()
