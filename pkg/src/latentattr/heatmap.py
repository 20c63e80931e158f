"""Contrastive feature heat maps of latent states.

For every baseline sample the ``k`` training samples whose latent vectors are
least cosine-similar to it are picked, each pair is attributed, and the ``l``
most impactful features of every latent row are counted into ``M``.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .attribution import (
    DEFAULT_EPSILON,
    DEFAULT_N_QUAD,
    impact_measure,
    pair_rows,
    row_labels,
    sample_latents,
)
from .errors import InputError, ShapeError
from .rng import SplitMix64, derive_seed

POSITIVE, NEGATIVE = "positive", "negative"
DEFAULT_N_BASELINES = 16


def parse_direction(d) -> str:
    if d is True or d in ("positive", "pos", "+"):
        return POSITIVE
    if d is False or d in ("negative", "neg", "-"):
        return NEGATIVE
    raise InputError(f"unknown direction {d!r}")


@dataclass(frozen=True)
class SelectionParams:
    m: int
    k: int = 5
    l: int = 3
    h: int | None = None  # latent rows processed; None means all
    n_quad: int = DEFAULT_N_QUAD
    epsilon: float = DEFAULT_EPSILON

    def validate(self, n_features: int, n_rows: int) -> "SelectionParams":
        h = n_rows if self.h is None else self.h
        if not 1 <= self.k <= self.m:
            raise InputError(f"k must satisfy 1 <= k <= m (k={self.k}, m={self.m})")
        if not 1 <= self.l <= n_features:
            raise InputError(f"l must satisfy 1 <= l <= D (l={self.l}, D={n_features})")
        if not 1 <= h <= n_rows:
            raise InputError(f"h must satisfy 1 <= h <= {n_rows} latent rows (h={h})")
        if self.n_quad < 1:
            raise InputError("n_quad must be >= 1")
        if not self.epsilon > 0:
            raise InputError("epsilon must be positive")
        return replace(self, h=h)


@dataclass(eq=False)
class HeatMap:
    counts: np.ndarray  # (rows, D) int64
    direction: str
    params: dict
    n_baselines: int
    row_labels: list = field(default_factory=list)  # (state, time) per row
    col_labels: list = field(default_factory=list)
    guarded: list = field(default_factory=list)  # (baseline, selected sample, row) increments dropped

    def zeros_like(self) -> "HeatMap":
        return HeatMap(np.zeros_like(self.counts), self.direction, dict(self.params), 0,
                       list(self.row_labels), list(self.col_labels), [])

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def rows(self, indices) -> "HeatMap":
        indices = list(indices)
        return HeatMap(self.counts[indices].copy(), self.direction, dict(self.params), self.n_baselines,
                       [self.row_labels[i] for i in indices], list(self.col_labels),
                       [g for g in self.guarded if g[2] in indices])


def balanced_subset(y, m: int, seed: int) -> np.ndarray:
    """Indices of a class-balanced draw: ceil(m/2) from class 0, floor(m/2) from class 1."""
    y = np.asarray(y)
    if not 1 <= m <= y.shape[0]:
        raise InputError(f"m={m} must be between 1 and the number of samples ({y.shape[0]})")
    if not np.all((y == 0) | (y == 1)):
        raise InputError("labels must be binary (0/1)")
    want = {0: m - m // 2, 1: m // 2}
    picked = []
    for cls in (0, 1):
        pool = np.flatnonzero(y == cls).tolist()
        if want[cls] > len(pool):
            raise InputError(f"m={m} needs {want[cls]} samples of class {cls}, only {len(pool)} available")
        picked += SplitMix64(derive_seed(seed, 0, cls)).sample(pool, want[cls])
    return np.array(picked, dtype=np.int64)


def cosine_similarities(Z, z) -> np.ndarray:
    """Row-wise cosine similarity; rows (or ``z``) with zero norm score 0."""
    Z = np.asarray(Z, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    dots = (Z * z[None, :]).sum(axis=1)
    norms = np.sqrt((Z * Z).sum(axis=1)) * np.sqrt((z * z).sum())
    sim = np.zeros(Z.shape[0])
    nz = norms > 0
    sim[nz] = dots[nz] / norms[nz]
    return sim


def top_dissimilar_samples(Z_c, z_hat, k: int) -> np.ndarray:
    Z_c = np.asarray(Z_c, dtype=np.float64)
    if Z_c.ndim != 2 or Z_c.shape[0] == 0:
        raise InputError("latent matrix is empty")
    if not 1 <= k <= Z_c.shape[0]:
        raise InputError(f"k={k} must be between 1 and {Z_c.shape[0]}")
    if Z_c.shape[1] != np.shape(z_hat)[0]:
        raise ShapeError("baseline latent length does not match the subset latents")
    return np.argsort(cosine_similarities(Z_c, z_hat), kind="stable")[:k]


def rank_features(p, direction: str, l: int) -> np.ndarray:
    """Top-``l`` feature indices per row of ``p``; ties go to the lower index."""
    p = np.asarray(p)
    key = -p if parse_direction(direction) == POSITIVE else p
    return np.argsort(key, axis=-1, kind="stable")[..., :l]


def top_impactful_features(d, model, x_hat, X_sel, l: int, n_quad: int = DEFAULT_N_QUAD,
                           epsilon: float = DEFAULT_EPSILON, h: int | None = None):
    """Top features of the first ``h`` latent rows for every ``(x, x_hat)`` pair.

    Returns ``(F, guarded)`` with ``F`` of shape ``(k, h, l)``. Guarded rows
    (latent shift below ``epsilon``) carry the ``l`` lowest feature indices.
    """
    F, guarded = [], []
    for x in X_sel:
        im = impact_measure(pair_rows(model, x, x_hat, n_quad), epsilon)
        rows = im.p.shape[0] if h is None else h
        F.append(rank_features(im.p[:rows], d, l))
        guarded.append(im.guarded[:rows])
    return np.array(F, dtype=np.int64), np.array(guarded, dtype=bool)


def _accumulate(args):
    model, selected, Z_c, baselines, offset, params, directions, n_rows, D = args
    counts = {d: np.zeros((n_rows, D), dtype=np.int64) for d in directions}
    dropped = []
    for b_i, x_hat in enumerate(baselines):
        ids = top_dissimilar_samples(Z_c, sample_latents(model, x_hat), params.k)
        for kk, idx in enumerate(ids):
            im = impact_measure(pair_rows(model, selected[idx], x_hat, params.n_quad), params.epsilon)
            p = im.p[:params.h]
            for g in np.flatnonzero(im.guarded[:params.h]):
                dropped.append((offset + b_i, int(idx), int(g)))
            keep = ~im.guarded[:params.h]
            rows = np.flatnonzero(keep)
            for d in directions:
                top = rank_features(p[keep], d, params.l)
                np.add.at(counts[d], (np.repeat(rows, params.l), top.ravel()), 1)
    return counts, dropped


def generate_heatmaps(directions, dataset, model, baselines, params: SelectionParams,
                      seed: int = 0, workers: int = 1) -> dict:
    """One heat map per direction from a single pass of pair attributions."""
    directions = [parse_direction(d) for d in directions]
    samples = list(dataset.samples)
    baselines = list(baselines)
    if not baselines:
        raise InputError("the baseline set is empty")
    T = samples[0].n_steps
    if any(s.n_steps != T for s in samples + baselines):
        raise InputError("all samples and baselines must have the same number of time steps")
    D = model.n_features
    if samples[0].n_features != D:
        raise ShapeError(f"data has {samples[0].n_features} features, model expects {D}")
    n_rows = model.n_states * T
    params = params.validate(D, n_rows)

    sub = balanced_subset(dataset.labels, params.m, seed)
    selected = [samples[i] for i in sub]
    Z_c = np.array([sample_latents(model, s) for s in selected])

    n_chunks = max(1, min(int(workers), len(baselines)))
    bounds = np.linspace(0, len(baselines), n_chunks + 1).astype(int)
    jobs = [(model, selected, Z_c, baselines[a:b], int(a), params, directions, n_rows, D)
            for a, b in zip(bounds[:-1], bounds[1:])]
    if n_chunks == 1:
        results = [_accumulate(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=n_chunks) as pool:
            results = list(pool.map(_accumulate, jobs))

    meta = {"m": params.m, "k": params.k, "l": params.l, "h": params.h,
            "n_quad": params.n_quad, "epsilon": params.epsilon, "seed": seed}
    labels = row_labels(model.n_states, T)
    out = {}
    for d in directions:
        counts = sum(r[0][d] for r in results)
        dropped = sorted(g for r in results for g in r[1])
        out[d] = HeatMap(counts, d, dict(meta), len(baselines), labels, list(dataset.feature_names), dropped)
    return out


def generate_heatmap(d, dataset, model, baselines, params: SelectionParams,
                     seed: int = 0, workers: int = 1) -> HeatMap:
    d = parse_direction(d)
    return generate_heatmaps([d], dataset, model, baselines, params, seed, workers)[d]


def merge_heatmaps(a: HeatMap, b: HeatMap) -> HeatMap:
    if a.counts.shape != b.counts.shape:
        raise ShapeError(f"heat map shapes differ: {a.counts.shape} vs {b.counts.shape}")
    if a.direction != b.direction:
        raise InputError(f"cannot merge {a.direction} with {b.direction} heat maps")
    if a.params != b.params:
        raise InputError(f"heat map parameters differ: {a.params} vs {b.params}")
    if a.col_labels != b.col_labels or a.row_labels != b.row_labels:
        raise InputError("heat map labels differ")
    return HeatMap(a.counts + b.counts, a.direction, dict(a.params), a.n_baselines + b.n_baselines,
                   list(a.row_labels), list(a.col_labels), sorted(a.guarded + b.guarded))


def default_baselines(dataset, exclude, count: int = DEFAULT_N_BASELINES, seed: int = 0) -> list:
    """Balanced seeded draw of ``count`` samples not in ``exclude``."""
    excluded = set(int(i) for i in exclude)
    held = [i for i in range(len(dataset)) if i not in excluded]
    if not held:
        raise InputError("no held-out samples left to use as baselines")
    y = dataset.labels
    picked = []
    for cls, want in ((0, count - count // 2), (1, count // 2)):
        pool = [i for i in held if y[i] == cls]
        picked += SplitMix64(derive_seed(seed, 1, cls)).sample(pool, min(want, len(pool)))
    return [dataset.samples[i] for i in picked]
