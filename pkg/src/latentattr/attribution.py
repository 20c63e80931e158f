"""Integrated Jacobians, normalized impacts and projected Jacobians.

Latent rows are ``(state, time)`` pairs flattened state-major: row
``s * T + n`` holds state ``s`` at time step ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ShapeError
from .model import MlpSpec, mlp_forward, mlp_forward_batch, mlp_jacobian_batch
from .ncde import NcdeModel, VectorFieldSpec, ncde_state_jacobian, normalized_time

DEFAULT_N_QUAD = 64
DEFAULT_EPSILON = 1e-12


@dataclass(frozen=True, eq=False)
class PairAttribution:
    j: np.ndarray  # (S, D)
    delta_z: np.ndarray  # (S,) latent of the test sample minus latent of the baseline
    baseline_id: str | None = None
    test_id: str | None = None
    n_quad: int = DEFAULT_N_QUAD


@dataclass(frozen=True, eq=False)
class ImpactMatrix:
    p: np.ndarray  # (S, D)
    guarded: np.ndarray  # (S,) bool, rows whose shift fell below epsilon


def trapezoid_nodes(n_quad: int):
    """Nodes and weights of the composite trapezoid rule on [0, 1] with ``n_quad`` panels."""
    if n_quad < 1:
        raise InputError("n_quad must be >= 1")
    lam = np.arange(n_quad + 1) / n_quad
    w = np.full(n_quad + 1, 1.0 / n_quad)
    w[0] = w[-1] = 0.5 / n_quad
    return lam, w


def integrated_jacobian(model: MlpSpec, x, x_hat, n_quad: int = DEFAULT_N_QUAD,
                        test_id=None, baseline_id=None) -> PairAttribution:
    """Attribution of ``z(x) - z(x_hat)`` to each feature along the joint straight line.

    ``j[s, i] = (x_i - x_hat_i) * mean_lambda dz_s/dx_i`` at ``x_hat + lambda (x - x_hat)``.
    """
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape or x.shape != (model.input_dim,):
        raise ShapeError(f"pair shapes {x.shape}/{x_hat.shape} do not match model input {model.input_dim}")
    lam, w = trapezoid_nodes(n_quad)
    diff = x - x_hat
    _, jac = mlp_jacobian_batch(model, x_hat + lam[:, None] * diff)
    avg = np.tensordot(w, jac, axes=1)
    delta = mlp_forward(model, x) - mlp_forward(model, x_hat)
    j = avg * diff[None, :]
    if not (np.all(np.isfinite(j)) and np.all(np.isfinite(delta))):
        raise FloatingPointError("non-finite model output during attribution")
    return PairAttribution(j, delta, baseline_id, test_id, n_quad)


@dataclass(frozen=True, eq=False)
class PointwiseModel:
    """Applies one MLP independently at every time step: ``z(t_n) = G(x(t_n))``."""

    mlp: MlpSpec

    @property
    def n_states(self) -> int:
        return self.mlp.output_dim

    @property
    def n_features(self) -> int:
        return self.mlp.input_dim

    def latents(self, times, values) -> np.ndarray:
        return mlp_forward_batch(self.mlp, values)


def _pointwise_rows(model: PointwiseModel, test, base, n_quad):
    lam, w = trapezoid_nodes(n_quad)
    T, D = test.shape
    diff = test - base
    pts = base[:, None, :] + lam[None, :, None] * diff[:, None, :]
    _, jac = mlp_jacobian_batch(model.mlp, pts.reshape(-1, D))
    jac = jac.reshape(T, lam.size, model.n_states, D)
    avg = np.einsum("q,tqsd->tsd", w, jac)
    j = avg * diff[:, None, :]
    delta = mlp_forward_batch(model.mlp, test) - mlp_forward_batch(model.mlp, base)
    return j, delta


def ncde_rows(model: NcdeModel, times, test, base, n_quad: int = DEFAULT_N_QUAD):
    """Same-time integrated Jacobians of every ``z(t_n)`` for an NCDE.

    Returns ``j`` of shape ``(T, H, D)`` and ``delta`` of shape ``(T, H)``.
    Along each interpolated series the state Jacobian is read directly from
    the vector field, so no derivative is ever propagated through the solver.
    """
    lam, w = trapezoid_nodes(n_quad)
    times = np.asarray(times, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    base = np.asarray(base, dtype=np.float64)
    diff = test - base
    T = times.shape[0]
    H, D = model.n_states, model.n_features
    acc = np.zeros((T, H, D))
    for lq, wq in zip(lam, w):
        traj = model.trajectory(times, base + lq * diff)
        tn = (times - times[0]) / (times[-1] - times[0])
        for n in range(T):
            acc[n] += wq * ncde_state_jacobian(model.field, traj.states[n], tn[n])
    j = acc * diff[:, None, :]
    delta = model.latents(times, test) - model.latents(times, base)
    return j, delta


def integrated_jacobian_ncde(field: VectorFieldSpec, test, base, t_index: int,
                             n_quad: int = DEFAULT_N_QUAD, initial: MlpSpec | None = None,
                             n_steps: int = 16) -> PairAttribution:
    """Attribution of the NCDE states at knot ``t_index`` to the features observed there.

    ``test`` and ``base`` are samples sharing the same knot times.
    """
    if test.times.shape != base.times.shape or not np.array_equal(test.times, base.times):
        raise InputError("test and baseline samples must share knot times")
    if not 0 <= t_index < test.times.shape[0]:
        raise InputError(f"t_index {t_index} out of range")
    model = NcdeModel(field, initial, n_steps)
    j, delta = ncde_rows(model, test.times, test.values, base.values, n_quad)
    return PairAttribution(j[t_index], delta[t_index], base.sample_id, test.sample_id, n_quad)


def pair_rows(model, test, base, n_quad: int = DEFAULT_N_QUAD) -> PairAttribution:
    """Attribution for all ``H * T`` latent rows of a sample pair (state-major)."""
    if test.values.shape != base.values.shape:
        raise ShapeError("test and baseline samples must have the same shape")
    if isinstance(model, NcdeModel):
        if not np.array_equal(test.times, base.times):
            raise InputError("test and baseline samples must share knot times")
        j, delta = ncde_rows(model, test.times, test.values, base.values, n_quad)
    elif isinstance(model, PointwiseModel):
        j, delta = _pointwise_rows(model, test.values, base.values, n_quad)
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    T, H, D = j.shape
    return PairAttribution(
        j.transpose(1, 0, 2).reshape(H * T, D), delta.T.reshape(H * T),
        base.sample_id, test.sample_id, n_quad)


def impact_measure(pa: PairAttribution, epsilon: float = DEFAULT_EPSILON) -> ImpactMatrix:
    """Each feature's share of a latent row's shift, signed; rows with ``|shift| < epsilon`` are zeroed."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    mag = np.abs(pa.delta_z)
    guarded = mag < epsilon
    p = np.zeros_like(pa.j)
    ok = ~guarded
    p[ok] = pa.j[ok] / mag[ok, None]
    return ImpactMatrix(p, guarded)


def projected_jacobian(pa: PairAttribution) -> np.ndarray:
    """Euclidean norm over latent rows of each feature's attribution column."""
    return np.linalg.norm(pa.j, axis=0)


def flatten_latents(Z) -> np.ndarray:
    """``(T, H)`` trajectory to the state-major row vector of length ``H * T``."""
    return np.asarray(Z).T.reshape(-1)


def row_labels(n_states: int, n_steps: int) -> list[tuple[int, int]]:
    return [(s, n) for s in range(n_states) for n in range(n_steps)]


def sample_latents(model, sample) -> np.ndarray:
    return flatten_latents(model.latents(sample.times, sample.values))
