"""Compare the compiled and numpy kernel backends on the hot paths.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from latentattr import _backend
from latentattr.attribution import PointwiseModel, integrated_jacobian
from latentattr.heatmap import POSITIVE, SelectionParams, balanced_subset, default_baselines, generate_heatmaps
from latentattr.model import random_mlp
from latentattr.ncde import fit_natural_cubic, solve_cde
from latentattr.synth import contiguous_subsets, make_block_model, make_dataset, make_ncde_model


def workloads():
    rng = np.random.default_rng(0)
    mlp = random_mlp([136, 32, 8], seed=1, activation="tanh")
    x, xh = rng.uniform(1, 2, (2, 136))

    ncde = make_ncde_model(36, 4, seed=2)
    path = fit_natural_cubic(np.linspace(0, 1, 12), rng.uniform(1, 2, (12, 36)))
    z0 = ncde.initial_state(path.values[0])

    ds = make_dataset(120, 4, 12, seed=3, activity=1.0, max_count=30)
    block = PointwiseModel(make_block_model(12, 4, contiguous_subsets(12, 4, 3), seed=3).mlp)
    params = SelectionParams(m=32, k=5, l=3)
    bases = default_baselines(ds, balanced_subset(ds.labels, 32, 0), 8, 0)

    return {
        "integrated jacobian (D=136, H=8, 256 nodes)": lambda: integrated_jacobian(mlp, x, xh, 256),
        "cde solve (D=36, H=4, 11 intervals)": lambda: solve_cde(ncde.field, path, z0, 16),
        "heat map (block model, 8 baselines)": lambda: generate_heatmaps([POSITIVE], ds, block, bases, params),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = _backend.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the numpy backend only")
    previous = _backend.BACKEND
    rows = []
    for name, fn in workloads().items():
        times = {}
        for b in backends:
            _backend.set_backend(b)
            fn()
            times[b] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        rows.append((name, times))
    _backend.set_backend(previous)

    print(f"{'workload':46s}" + "".join(f"{b:>12s}" for b in backends) + "     speedup")
    for name, times in rows:
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:46s}" + "".join(f"{times[b] * 1e3:10.2f}ms" for b in backends) + f"{speed:10.1f}x")


if __name__ == "__main__":
    main()
