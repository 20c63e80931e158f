"""Rank latent rows by their influence on a readout and build explanation chains.

Scores for a linear head are exact readout attributions
``w_s * (z_s - z_ref_s)``; a nonlinear head falls back to permutation
importance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attribution import sample_latents
from .errors import InputError, ShapeError
from .heatmap import NEGATIVE, POSITIVE, SelectionParams, generate_heatmaps
from .rng import SplitMix64, derive_seed


@dataclass(frozen=True, eq=False)
class ReadoutSpec:
    """Linear head over the concatenated (state-major) latent rows."""

    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or not np.all(np.isfinite(w)) or not np.isfinite(self.bias):
            raise ShapeError("readout weights must be a finite vector")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    def predict(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.float64)
        if Z.shape[-1] != self.weights.shape[0]:
            raise ShapeError(f"latent width {Z.shape[-1]} != readout width {self.weights.shape[0]}")
        return Z @ self.weights + self.bias


@dataclass(frozen=True)
class LatentRank:
    row: int
    state: int
    time: int
    score: float
    sign: int


def linear_readout_attribution(readout: ReadoutSpec, z, z_ref) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    z_ref = np.asarray(z_ref, dtype=np.float64)
    if z.shape != readout.weights.shape or z_ref.shape != readout.weights.shape:
        raise ShapeError("latent vectors must match the readout width")
    return readout.weights * (z - z_ref)


def _predict(head, Z):
    return head.predict(Z) if hasattr(head, "predict") else np.asarray(head(Z), dtype=np.float64)


def permutation_importance(head, Z_batch, n_permutations: int = 10, seed: int = 0) -> np.ndarray:
    """Mean absolute output change when one latent column is shuffled across the batch."""
    Z = np.asarray(Z_batch, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] < 2:
        raise InputError("permutation importance needs a batch of at least two latent vectors")
    if n_permutations < 1:
        raise InputError("n_permutations must be >= 1")
    base = _predict(head, Z)
    scores = np.zeros(Z.shape[1])
    for s in range(Z.shape[1]):
        total = 0.0
        for p in range(n_permutations):
            perm = SplitMix64(derive_seed(seed, 5, s, p)).permutation(Z.shape[0])
            Zp = Z.copy()
            Zp[:, s] = Z[perm, s]
            total += np.mean(np.abs(_predict(head, Zp) - base))
        scores[s] = total / n_permutations
    return scores


def rank_latents(head, Z, n_states: int, n_steps: int, method: str = "linear",
                 z_ref=None, n_permutations: int = 10, seed: int = 0) -> list[LatentRank]:
    """Latent rows ordered by ``|score|`` (descending, ties by row index)."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.shape[1] != n_states * n_steps:
        raise ShapeError(f"{Z.shape[1]} latent columns != {n_states} states x {n_steps} steps")
    if method == "linear":
        if not isinstance(head, ReadoutSpec):
            raise InputError("linear ranking needs a ReadoutSpec head")
        ref = Z.mean(axis=0) if z_ref is None else np.asarray(z_ref, dtype=np.float64)
        contrib = np.array([linear_readout_attribution(head, z, ref) for z in Z])
        scores = np.abs(contrib).mean(axis=0)
        signs = np.where(head.weights < 0, -1, 1)
    elif method == "permutation":
        scores = permutation_importance(head, Z, n_permutations, seed)
        out = _predict(head, Z)
        cov = ((Z - Z.mean(axis=0)) * (out - out.mean())[:, None]).mean(axis=0)
        signs = np.where(cov < 0, -1, 1)
    else:
        raise InputError(f"unknown ranking method {method!r}")
    order = sorted(range(Z.shape[1]), key=lambda r: (-abs(scores[r]), r))
    return [LatentRank(r, r // n_steps, r % n_steps, float(scores[r]), int(signs[r])) for r in order]


def top_features_by_count(counts_row, n: int) -> list[int]:
    counts_row = np.asarray(counts_row)
    return [int(i) for i in np.argsort(-counts_row, kind="stable")[:n]]


@dataclass
class ExplanationReport:
    method: str
    ranking: list = field(default_factory=list)
    top: list = field(default_factory=list)  # LatentRank of the selected rows
    heatmaps: dict = field(default_factory=dict)  # direction -> HeatMap restricted to top rows
    top_features: dict = field(default_factory=dict)  # (row, direction) -> feature indices
    scatter: dict = field(default_factory=dict)  # (row, direction) -> (sample_ids, (N, 3) array)
    feature_names: list = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.top


def explanation_chain(model, readout, dataset, baselines, params: SelectionParams, top_n: int,
                      seed: int = 0, workers: int = 1, method: str = "linear",
                      n_permutations: int = 10) -> ExplanationReport:
    """Output -> most influential latent rows -> their most impactful features -> scatter data."""
    if top_n < 0:
        raise InputError("top_n must be >= 0")
    report = ExplanationReport(method, feature_names=list(dataset.feature_names))
    if top_n == 0:
        return report
    T = dataset[0].n_steps
    Z = np.array([sample_latents(model, s) for s in dataset.samples])
    report.ranking = rank_latents(readout, Z, model.n_states, T, method,
                                  n_permutations=n_permutations, seed=seed)
    report.top = report.ranking[:top_n]
    rows = [r.row for r in report.top]

    full = SelectionParams(params.m, params.k, params.l, None, params.n_quad, params.epsilon)
    maps = generate_heatmaps([POSITIVE, NEGATIVE], dataset, model, baselines, full, seed, workers)
    for d, hm in maps.items():
        report.heatmaps[d] = hm.rows(rows)
        for r in rows:
            feats = top_features_by_count(hm.counts[r], params.l)
            report.top_features[(r, d)] = feats
            if len(feats) >= 2:
                n = r % T
                a, b = feats[0], feats[1]
                table = np.array([[s.values[n, a], s.values[n, b], Z[i, r]]
                                  for i, s in enumerate(dataset.samples)])
                report.scatter[(r, d)] = ([s.sample_id for s in dataset.samples], table)
    return report
