"""Ground-truth models and datasets for checking the heat-map pipeline end to end."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .model import MlpSpec
from .ncde import NcdeModel, VectorFieldSpec
from .rng import SplitMix64, derive_seed
from .samples import Dataset, TimeSeriesSample


@dataclass(frozen=True, eq=False)
class BlockModelSpec:
    """Latent state ``s`` depends only on the features in ``subsets[s]``."""

    D: int
    H: int
    subsets: tuple
    mlp: MlpSpec


def _signed(rng: SplitMix64) -> float:
    v = rng.uniform(0.5, 1.5)
    return v if rng.randbelow(2) else -v


def make_block_model(D: int, H: int, subsets, seed: int = 0) -> BlockModelSpec:
    """Two-layer tanh network whose first layer is masked to the subsets and whose second is diagonal."""
    subsets = tuple(tuple(sorted(int(i) for i in s)) for s in subsets)
    if len(subsets) != H:
        raise InputError(f"need {H} subsets, got {len(subsets)}")
    seen: set[int] = set()
    for s in subsets:
        if not s:
            raise InputError("subsets must be non-empty")
        if any(not 0 <= i < D for i in s):
            raise InputError(f"subset {s} has indices outside [0, {D})")
        if seen & set(s):
            raise InputError(f"subsets overlap on {sorted(seen & set(s))}")
        seen |= set(s)
    rng = SplitMix64(seed)
    W1 = np.zeros((H, D))
    for row, s in enumerate(subsets):
        for i in s:
            W1[row, i] = _signed(rng)
    b1 = np.array([rng.uniform(-0.1, 0.1) for _ in range(H)])
    W2 = np.diag([_signed(rng) for _ in range(H)])
    b2 = np.zeros(H)
    mlp = MlpSpec((W1, W2), (b1, b2), ("tanh", "identity"))
    return BlockModelSpec(D, H, subsets, mlp)


def contiguous_subsets(D: int, H: int, size: int) -> list[list[int]]:
    if H * size > D:
        raise InputError(f"{H} subsets of size {size} do not fit in {D} features")
    return [list(range(s * size, (s + 1) * size)) for s in range(H)]


def make_dataset(n: int, T: int, D_raw: int, seed: int = 0, activity: float = 0.35,
                 max_count: int = 4) -> Dataset:
    """Sparse non-negative integer activity counts with balanced binary labels.

    Each sample has its own per-feature activation rate; labels mark the upper
    half of a hidden linear score of the summed counts (ties by sample order),
    so both classes occur whenever ``n >= 2``.
    """
    if min(n, T, D_raw) < 1:
        raise InputError("n, T and D_raw must be >= 1")
    rng = SplitMix64(derive_seed(seed, 2))
    hidden = np.array([rng.uniform(-1.0, 1.0) for _ in range(D_raw)])
    data = []
    for _ in range(n):
        rates = [rng.uniform(0.0, 2.0 * activity) for _ in range(D_raw)]
        vals = np.zeros((T, D_raw))
        for t in range(T):
            for f in range(D_raw):
                if rng.uniform() < rates[f]:
                    vals[t, f] = 1 + rng.randbelow(max_count)
        data.append(vals)
    scores = np.array([v.sum(axis=0) @ hidden for v in data])
    order = np.argsort(scores, kind="stable")
    labels = np.zeros(n, dtype=np.int64)
    labels[order[n - n // 2:]] = 1
    times = np.arange(T, dtype=np.float64)
    samples = [TimeSeriesSample(f"s{i:04d}", times, data[i], int(labels[i])) for i in range(n)]
    return Dataset(samples, [f"f{i}" for i in range(D_raw)])


def make_ncde_model(D: int, H: int, seed: int = 0, width: int = 16, scale: float = 0.5) -> NcdeModel:
    """Random tanh vector field with a linear initial map; small weights keep solves tame."""
    from .model import random_mlp

    field = random_mlp([H + 1, width, H * D], derive_seed(seed, 3), "tanh", scale, "tanh")
    initial = random_mlp([D, H], derive_seed(seed, 4), "identity", 1.0, "identity")
    return NcdeModel(VectorFieldSpec(field, H, D), initial)


def subset_columns(subset, D_raw: int | None = None, augmented: bool = False) -> set[int]:
    """Heat-map columns belonging to a raw-feature subset, including derived cumulative columns."""
    cols = set(int(i) for i in subset)
    if augmented:
        if D_raw is None:
            raise InputError("D_raw is required for the augmented schema")
        cols = {block * D_raw + i for block in range(4) for i in cols}
    return cols


def recovery_score(M, subsets, n_steps: int | None = None, D_raw: int | None = None,
                   augmented: bool = False) -> np.ndarray:
    """Fraction of each row's count mass inside its state's true subset (NaN for empty rows).

    Rows are state-major, so row ``r`` belongs to state ``r // n_steps``.
    """
    counts = np.asarray(getattr(M, "counts", M), dtype=np.float64)
    R, D = counts.shape
    H = len(subsets)
    T = n_steps if n_steps is not None else R // H
    if H * T != R:
        raise InputError(f"{R} heat-map rows do not split into {H} states")
    out = np.full(R, np.nan)
    for r in range(R):
        total = counts[r].sum()
        if total > 0:
            cols = sorted(subset_columns(subsets[r // T], D_raw, augmented))
            out[r] = counts[r, cols].sum() / total
    return out
