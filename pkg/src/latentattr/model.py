"""Multilayer perceptrons with exact forward-mode Jacobians."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _backend
from .errors import ShapeError
from .rng import SplitMix64

ACTIVATIONS = {"identity": 0, "tanh": 1, "relu": 2}


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MlpSpec:
    """Dense feed-forward network.

    ``weights[k]`` has shape ``(out, in)`` so that layer ``k`` computes
    ``act(weights[k] @ h + biases[k])``.
    """

    weights: tuple
    biases: tuple
    activations: tuple

    def __post_init__(self):
        ws = tuple(_frozen(w) for w in self.weights)
        bs = tuple(_frozen(b) for b in self.biases)
        acts = tuple(self.activations)
        if not ws:
            raise ShapeError("an MLP needs at least one layer")
        if not (len(ws) == len(bs) == len(acts)):
            raise ShapeError("weights, biases and activations must have one entry per layer")
        for k, (w, b, act) in enumerate(zip(ws, bs, acts)):
            if w.ndim != 2:
                raise ShapeError(f"layer {k}: weight matrix must be 2-D")
            if b.shape != (w.shape[0],):
                raise ShapeError(f"layer {k}: bias length {b.shape} != {w.shape[0]} outputs")
            if k and w.shape[1] != ws[k - 1].shape[0]:
                raise ShapeError(f"layer {k}: input width {w.shape[1]} != previous output {ws[k - 1].shape[0]}")
            if act not in ACTIVATIONS:
                raise ShapeError(f"layer {k}: unknown activation {act!r}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ShapeError(f"layer {k}: non-finite parameters")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)
        object.__setattr__(self, "activations", acts)

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @cached_property
    def packed(self):
        """Flat ``(W, b, dims, acts)`` arrays consumed by the kernels."""
        W = np.concatenate([w.ravel() for w in self.weights])
        b = np.concatenate(self.biases)
        dims = np.array(self.layer_dims, dtype=np.intp)
        acts = np.array([ACTIVATIONS[a] for a in self.activations], dtype=np.intc)
        return W, b, dims, acts

    def __eq__(self, other):
        if not isinstance(other, MlpSpec):
            return NotImplemented
        return (
            self.activations == other.activations
            and len(self.weights) == len(other.weights)
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )

    __hash__ = None


def linear_mlp(W, b=None) -> MlpSpec:
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    b = np.zeros(W.shape[0]) if b is None else b
    return MlpSpec((W,), (b,), ("identity",))


def random_mlp(dims: Sequence[int], seed: int, activation: str = "tanh",
               scale: float = 1.0, final_activation: str = "identity") -> MlpSpec:
    """Seeded MLP with weights uniform in ``[-scale, scale] / sqrt(fan_in)``."""
    rng = SplitMix64(seed)
    weights, biases, acts = [], [], []
    for k in range(len(dims) - 1):
        n_in, n_out = dims[k], dims[k + 1]
        bound = scale / np.sqrt(n_in)
        weights.append(np.array([[rng.uniform(-bound, bound) for _ in range(n_in)] for _ in range(n_out)]))
        biases.append(np.array([rng.uniform(-0.1, 0.1) for _ in range(n_out)]))
        acts.append(final_activation if k == len(dims) - 2 else activation)
    return MlpSpec(tuple(weights), tuple(biases), tuple(acts))


def _check_input(spec: MlpSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (spec.input_dim,):
        raise ShapeError(f"input has {x.shape[-1] if x.ndim else 0} features, model expects {spec.input_dim}")
    return x


def mlp_forward(spec: MlpSpec, x) -> np.ndarray:
    x = _check_input(spec, x)
    if x.ndim != 1:
        raise ShapeError("mlp_forward takes a single feature vector; use mlp_forward_batch")
    return _backend.kernels.mlp_forward(*spec.packed, x)


def mlp_forward_batch(spec: MlpSpec, X) -> np.ndarray:
    X = _check_input(spec, np.atleast_2d(X))
    return _backend.kernels.mlp_forward_batch(*spec.packed, X)


def mlp_jacobian(spec: MlpSpec, x) -> np.ndarray:
    """``(H, D)`` Jacobian; column ``i`` is the tangent pushed from a unit step in ``x_i``."""
    x = _check_input(spec, x)
    if x.ndim != 1:
        raise ShapeError("mlp_jacobian takes a single feature vector")
    _, jac = _backend.kernels.mlp_jacobian_batch(*spec.packed, x[None, :])
    return jac[0]


def mlp_jacobian_batch(spec: MlpSpec, X):
    """Outputs ``(N, H)`` and Jacobians ``(N, H, D)`` at every row of ``X``."""
    X = _check_input(spec, np.atleast_2d(X))
    return _backend.kernels.mlp_jacobian_batch(*spec.packed, X)


def jacobian_fd(spec: MlpSpec, x, step: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian; independent of the forward-mode path."""
    if not step > 0:
        raise ValueError("step must be positive")
    x = _check_input(spec, x)
    D = spec.input_dim
    jac = np.empty((spec.output_dim, D))
    for i in range(D):
        e = np.zeros(D)
        e[i] = step
        jac[:, i] = (mlp_forward(spec, x + e) - mlp_forward(spec, x - e)) / (2.0 * step)
    return jac
