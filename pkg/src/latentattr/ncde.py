"""Neural controlled differential equations: control paths, RK4 solves, state Jacobians."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from . import _backend
from .errors import InputError, NumericalBlowupError, ShapeError
from .model import MlpSpec, mlp_forward

DEFAULT_STEPS = 16


@dataclass(frozen=True, eq=False)
class ControlPath:
    """Natural cubic interpolant through ``(knot_times[n], values[n])``.

    ``coef[k, p, d]`` multiplies ``(t - knot_times[k]) ** p`` for channel ``d``.
    """

    knot_times: np.ndarray
    coef: np.ndarray
    values: np.ndarray

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    @property
    def t_first(self) -> float:
        return float(self.knot_times[0])

    @property
    def t_span(self) -> float:
        return float(self.knot_times[-1] - self.knot_times[0])


def fit_natural_cubic(times, values) -> ControlPath:
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if times.ndim != 1 or times.shape[0] < 2:
        raise InputError("a control path needs at least two knots")
    if values.shape[0] != times.shape[0]:
        raise ShapeError(f"{values.shape[0]} value rows for {times.shape[0]} knots")
    if not np.all(np.diff(times) > 0):
        raise InputError("knot times must be strictly increasing")
    spline = CubicSpline(times, values, axis=0, bc_type="natural")
    # scipy stores highest power first: c[0] cubic ... c[3] constant
    coef = np.ascontiguousarray(spline.c[::-1].transpose(1, 0, 2))
    # exact interpolation at the left end of every segment
    coef[:, 0, :] = values[:-1]
    return ControlPath(times.copy(), coef, values.copy())


def _segment(path: ControlPath, t: float) -> int:
    k = int(np.searchsorted(path.knot_times, t, side="right")) - 1
    return min(max(k, 0), path.knot_times.shape[0] - 2)


def eval_path(path: ControlPath, t: float, side: str = "right"):
    """Value and analytic time derivative of the path at ``t``.

    At an interior knot the derivative comes from the segment on ``side``;
    the two agree because the spline is C2. At any knot the value is the knot
    value itself.
    """
    t = float(t)
    kt = path.knot_times
    if not kt[0] <= t <= kt[-1]:
        raise InputError(f"t={t} outside the path window [{kt[0]}, {kt[-1]}]")
    k = _segment(path, t)
    if side == "left" and k > 0 and t == kt[k]:
        k -= 1
    c = path.coef[k]
    u = t - kt[k]
    x = c[0] + u * (c[1] + u * (c[2] + u * c[3]))
    dx = c[1] + u * (2.0 * c[2] + 3.0 * u * c[3])
    hit = np.flatnonzero(kt == t)
    if hit.size:
        x = path.values[hit[0]].copy()
    return x, dx


@dataclass(frozen=True, eq=False)
class VectorFieldSpec:
    """MLP mapping ``[z; t_normalized]`` (H + 1 inputs) to an ``H x D`` matrix, row-major."""

    mlp: MlpSpec
    hidden: int
    input_dim: int

    def __post_init__(self):
        if self.mlp.input_dim != self.hidden + 1:
            raise ShapeError(f"vector field takes {self.mlp.input_dim} inputs, expected H+1={self.hidden + 1}")
        if self.mlp.output_dim != self.hidden * self.input_dim:
            raise ShapeError(
                f"vector field emits {self.mlp.output_dim} values, expected H*D={self.hidden * self.input_dim}")


@dataclass(frozen=True)
class LatentTrajectory:
    times: np.ndarray
    states: np.ndarray  # (T, H)


def normalized_time(path: ControlPath, t):
    return (np.asarray(t, dtype=np.float64) - path.t_first) / path.t_span


def solve_cde(field: VectorFieldSpec, path: ControlPath, z0,
              n_steps_per_interval: int = DEFAULT_STEPS) -> LatentTrajectory:
    """Integrate ``dz = f(z, t) dx`` with fixed-step RK4, recording every knot."""
    if n_steps_per_interval < 1:
        raise InputError("n_steps_per_interval must be >= 1")
    if path.n_channels != field.input_dim:
        raise ShapeError(f"path has {path.n_channels} channels, field expects {field.input_dim}")
    z0 = np.asarray(z0, dtype=np.float64)
    if z0.shape != (field.hidden,):
        raise ShapeError(f"z0 has shape {z0.shape}, expected ({field.hidden},)")
    states, failed = _backend.kernels.cde_solve(
        *field.mlp.packed, field.hidden, field.input_dim, path.knot_times, path.coef,
        z0, int(n_steps_per_interval), path.t_first, path.t_span)
    if failed >= 0:
        a, b = path.knot_times[failed], path.knot_times[failed + 1]
        raise NumericalBlowupError(f"non-finite latent state on interval {failed} [{a}, {b}]")
    return LatentTrajectory(path.knot_times.copy(), states)


def ncde_state_jacobian(field: VectorFieldSpec, z, t: float) -> np.ndarray:
    """``dz/dx`` at ``(z, t)``: one forward pass of the vector field, reshaped to ``(H, D)``.

    ``t`` is the normalized time that the field consumes.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (field.hidden,):
        raise ShapeError(f"z has shape {z.shape}, expected ({field.hidden},)")
    inp = np.concatenate([z, [float(t)]])
    return mlp_forward(field.mlp, inp).reshape(field.hidden, field.input_dim)


@dataclass(frozen=True, eq=False)
class NcdeModel:
    """Latent extractor: spline the sample, solve the CDE, read states at the knots.

    ``initial`` maps the first observation to ``z(t_0)``; without it the
    solve starts from zero.
    """

    field: VectorFieldSpec
    initial: MlpSpec | None = None
    n_steps: int = DEFAULT_STEPS

    @property
    def n_states(self) -> int:
        return self.field.hidden

    @property
    def n_features(self) -> int:
        return self.field.input_dim

    def initial_state(self, x0) -> np.ndarray:
        if self.initial is None:
            return np.zeros(self.field.hidden)
        return mlp_forward(self.initial, x0)

    def trajectory(self, times, values) -> LatentTrajectory:
        path = fit_natural_cubic(times, values)
        return solve_cde(self.field, path, self.initial_state(path.values[0]), self.n_steps)

    def latents(self, times, values) -> np.ndarray:
        return self.trajectory(times, values).states
