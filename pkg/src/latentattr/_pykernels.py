"""Pure numpy kernels. Same signatures as the compiled ``_ckernels`` module.

MLPs arrive packed: ``W`` is every layer's row-major ``(out, in)`` block
concatenated, ``b`` the concatenated biases, ``dims`` the layer widths and
``acts`` one activation code per layer (0 identity, 1 tanh, 2 relu).
"""

import numpy as np

ACT_IDENTITY, ACT_TANH, ACT_RELU = 0, 1, 2


def _layers(W, b, dims):
    wo = bo = 0
    for k in range(len(dims) - 1):
        n_in, n_out = int(dims[k]), int(dims[k + 1])
        yield W[wo:wo + n_in * n_out].reshape(n_out, n_in), b[bo:bo + n_out]
        wo += n_in * n_out
        bo += n_out


def _activate(code, a):
    if code == ACT_TANH:
        return np.tanh(a)
    if code == ACT_RELU:
        return np.maximum(a, 0.0)
    return a


def mlp_forward(W, b, dims, acts, x):
    h = np.asarray(x, dtype=np.float64)
    for (Wl, bl), code in zip(_layers(W, b, dims), acts):
        h = _activate(code, Wl @ h + bl)
    return h


def mlp_forward_batch(W, b, dims, acts, X):
    h = np.asarray(X, dtype=np.float64)
    for (Wl, bl), code in zip(_layers(W, b, dims), acts):
        h = _activate(code, h @ Wl.T + bl)
    return h


def mlp_jacobian_batch(W, b, dims, acts, X):
    """Outputs ``(N, out)`` and Jacobians ``(N, out, D)`` by forward-mode tangents."""
    h = np.asarray(X, dtype=np.float64)
    tan = None
    for (Wl, bl), code in zip(_layers(W, b, dims), acts):
        a = h @ Wl.T + bl
        # the input tangent is the identity, so the first layer's is the weight matrix
        tan = np.broadcast_to(Wl, (h.shape[0],) + Wl.shape) if tan is None else Wl @ tan
        if code == ACT_TANH:
            h = np.tanh(a)
            tan = tan * (1.0 - h * h)[:, :, None]
        elif code == ACT_RELU:
            h = np.maximum(a, 0.0)
            tan = tan * (a > 0.0)[:, :, None]
        else:
            h = a
    return h, np.ascontiguousarray(tan)


def cde_solve(W, b, dims, acts, H, D, knots, coef, z0, n_steps, t_first, t_span):
    """Fixed-step RK4 for dz/dt = F(z, t) dx/dt along a piecewise-cubic path.

    ``coef[k, p, d]`` is the power-``p`` coefficient of channel ``d`` on knot
    interval ``k`` in the local offset ``t - knots[k]``. Returns the states at
    every knot and the index of the first interval that went non-finite (-1
    when the solve stayed finite).
    """
    T = knots.shape[0]
    states = np.empty((T, H))
    z = np.array(z0, dtype=np.float64)
    states[0] = z
    inp = np.empty(H + 1)

    def rhs(k, t, zz):
        u = t - knots[k]
        dx = coef[k, 1] + u * (2.0 * coef[k, 2] + 3.0 * u * coef[k, 3])
        inp[:H] = zz
        inp[H] = (t - t_first) / t_span
        F = mlp_forward(W, b, dims, acts, inp).reshape(H, D)
        return F @ dx

    for k in range(T - 1):
        h = (knots[k + 1] - knots[k]) / n_steps
        for s in range(n_steps):
            t = knots[k] + s * h
            k1 = rhs(k, t, z)
            k2 = rhs(k, t + 0.5 * h, z + 0.5 * h * k1)
            k3 = rhs(k, t + 0.5 * h, z + 0.5 * h * k2)
            k4 = rhs(k, t + h, z + h * k3)
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(z)):
            states[k + 1:] = np.nan
            return states, k
        states[k + 1] = z
    return states, -1
