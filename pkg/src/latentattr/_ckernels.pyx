# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: MLP forward pass, forward-mode Jacobian and the RK4 CDE loop.

Signatures mirror ``_pykernels``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, isfinite

cnp.import_array()

DEF ACT_TANH = 1
DEF ACT_RELU = 2


cdef inline double _act(int code, double a) noexcept nogil:
    if code == ACT_TANH:
        return tanh(a)
    if code == ACT_RELU:
        return a if a > 0.0 else 0.0
    return a


cdef inline double _dact(int code, double a, double h) noexcept nogil:
    if code == ACT_TANH:
        return 1.0 - h * h
    if code == ACT_RELU:
        return 1.0 if a > 0.0 else 0.0
    return 1.0


cdef void _forward(const double* W, const double* b, const Py_ssize_t* dims,
                   const int* acts, Py_ssize_t n_layers, const double* x,
                   double* cur, double* nxt, double* out) noexcept nogil:
    cdef Py_ssize_t k, o, i, n_in, n_out, wo = 0, bo = 0
    cdef double s
    cdef double* tmp
    for i in range(dims[0]):
        cur[i] = x[i]
    for k in range(n_layers):
        n_in = dims[k]
        n_out = dims[k + 1]
        for o in range(n_out):
            s = 0.0
            for i in range(n_in):
                s += W[wo + o * n_in + i] * cur[i]
            nxt[o] = _act(acts[k], s + b[bo + o])
        tmp = cur
        cur = nxt
        nxt = tmp
        wo += n_in * n_out
        bo += n_out
    for i in range(dims[n_layers]):
        out[i] = cur[i]


cdef void _forward_jac(const double* W, const double* b, const Py_ssize_t* dims,
                       const int* acts, Py_ssize_t n_layers, const double* x,
                       double* cur, double* nxt, double* tcur, double* tnxt,
                       double* out, double* jac) noexcept nogil:
    cdef Py_ssize_t k, o, i, d, n_in, n_out, wo = 0, bo = 0
    cdef Py_ssize_t D = dims[0]
    cdef double s, a, h, dh, w
    cdef double* tmp
    for i in range(D):
        cur[i] = x[i]
    for k in range(n_layers):
        n_in = dims[k]
        n_out = dims[k + 1]
        for o in range(n_out):
            s = 0.0
            for i in range(n_in):
                s += W[wo + o * n_in + i] * cur[i]
            a = s + b[bo + o]
            h = _act(acts[k], a)
            dh = _dact(acts[k], a, h)
            nxt[o] = h
            if k == 0:
                # the input tangent is the identity, so the first layer's is its weight row
                for d in range(D):
                    tnxt[o * D + d] = W[o * n_in + d] * dh
                continue
            for d in range(D):
                tnxt[o * D + d] = 0.0
            for i in range(n_in):
                w = W[wo + o * n_in + i]
                for d in range(D):
                    tnxt[o * D + d] += w * tcur[i * D + d]
            for d in range(D):
                tnxt[o * D + d] *= dh
        tmp = cur
        cur = nxt
        nxt = tmp
        tmp = tcur
        tcur = tnxt
        tnxt = tmp
        wo += n_in * n_out
        bo += n_out
    n_out = dims[n_layers]
    for o in range(n_out):
        out[o] = cur[o]
        for d in range(D):
            jac[o * D + d] = tcur[o * D + d]


def _prep(W, b, dims, acts):
    W = np.ascontiguousarray(W, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    dims = np.ascontiguousarray(dims, dtype=np.intp)
    acts = np.ascontiguousarray(acts, dtype=np.intc)
    return W, b, dims, acts, int(dims.max())


def mlp_forward(W, b, dims, acts, x):
    W, b, dims, acts, width = _prep(W, b, dims, acts)
    cdef const double[::1] Wv = W
    cdef const double[::1] bv = b
    cdef const Py_ssize_t[::1] dv = dims
    cdef const int[::1] av = acts
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] cur = np.empty(width)
    cdef double[::1] nxt = np.empty(width)
    out = np.empty(dims[dims.shape[0] - 1])
    cdef double[::1] ov = out
    _forward(&Wv[0], &bv[0], &dv[0], &av[0], dv.shape[0] - 1, &xv[0], &cur[0], &nxt[0], &ov[0])
    return out


def mlp_forward_batch(W, b, dims, acts, X):
    W, b, dims, acts, width = _prep(W, b, dims, acts)
    cdef const double[::1] Wv = W
    cdef const double[::1] bv = b
    cdef const Py_ssize_t[::1] dv = dims
    cdef const int[::1] av = acts
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] cur = np.empty(width)
    cdef double[::1] nxt = np.empty(width)
    out = np.empty((Xv.shape[0], dims[dims.shape[0] - 1]))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t n
    for n in range(Xv.shape[0]):
        _forward(&Wv[0], &bv[0], &dv[0], &av[0], dv.shape[0] - 1, &Xv[n, 0],
                 &cur[0], &nxt[0], &ov[n, 0])
    return out


def mlp_jacobian_batch(W, b, dims, acts, X):
    W, b, dims, acts, width = _prep(W, b, dims, acts)
    cdef const double[::1] Wv = W
    cdef const double[::1] bv = b
    cdef const Py_ssize_t[::1] dv = dims
    cdef const int[::1] av = acts
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t D = dims[0], H = dims[dims.shape[0] - 1], n
    cdef double[::1] cur = np.empty(width)
    cdef double[::1] nxt = np.empty(width)
    cdef double[::1] tcur = np.empty(width * D)
    cdef double[::1] tnxt = np.empty(width * D)
    out = np.empty((Xv.shape[0], H))
    jac = np.empty((Xv.shape[0], H, D))
    cdef double[:, ::1] ov = out
    cdef double[:, :, ::1] jv = jac
    for n in range(Xv.shape[0]):
        _forward_jac(&Wv[0], &bv[0], &dv[0], &av[0], dv.shape[0] - 1, &Xv[n, 0],
                     &cur[0], &nxt[0], &tcur[0], &tnxt[0], &ov[n, 0], &jv[n, 0, 0])
    return out, jac


cdef void _rhs(const double* W, const double* b, const Py_ssize_t* dims,
               const int* acts, Py_ssize_t n_layers, Py_ssize_t H, Py_ssize_t D,
               const double* c, double u, double tn, const double* z,
               double* inp, double* cur, double* nxt, double* F, double* dx,
               double* f) noexcept nogil:
    cdef Py_ssize_t r, d
    cdef double s
    for d in range(D):
        dx[d] = c[D + d] + u * (2.0 * c[2 * D + d] + 3.0 * u * c[3 * D + d])
    for r in range(H):
        inp[r] = z[r]
    inp[H] = tn
    _forward(W, b, dims, acts, n_layers, inp, cur, nxt, F)
    for r in range(H):
        s = 0.0
        for d in range(D):
            s += F[r * D + d] * dx[d]
        f[r] = s


def cde_solve(W, b, dims, acts, Py_ssize_t H, Py_ssize_t D, knots, coef, z0,
              Py_ssize_t n_steps, double t_first, double t_span):
    W, b, dims, acts, width = _prep(W, b, dims, acts)
    cdef const double[::1] Wv = W
    cdef const double[::1] bv = b
    cdef const Py_ssize_t[::1] dv = dims
    cdef const int[::1] av = acts
    cdef const double[::1] kv = np.ascontiguousarray(knots, dtype=np.float64)
    cdef const double[:, :, ::1] cv = np.ascontiguousarray(coef, dtype=np.float64)
    cdef Py_ssize_t T = kv.shape[0], n_layers = dv.shape[0] - 1
    states = np.empty((T, H))
    cdef double[:, ::1] sv = states
    cdef double[::1] z = np.array(z0, dtype=np.float64)
    cdef double[::1] zt = np.empty(H)
    cdef double[::1] k1 = np.empty(H)
    cdef double[::1] k2 = np.empty(H)
    cdef double[::1] k3 = np.empty(H)
    cdef double[::1] k4 = np.empty(H)
    cdef double[::1] inp = np.empty(H + 1)
    cdef double[::1] cur = np.empty(width)
    cdef double[::1] nxt = np.empty(width)
    cdef double[::1] F = np.empty(H * D)
    cdef double[::1] dx = np.empty(D)
    cdef Py_ssize_t k, s, r
    cdef double h, t, t0
    cdef bint ok
    for r in range(H):
        sv[0, r] = z[r]
    for k in range(T - 1):
        t0 = kv[k]
        h = (kv[k + 1] - t0) / n_steps
        for s in range(n_steps):
            t = t0 + s * h
            _rhs(&Wv[0], &bv[0], &dv[0], &av[0], n_layers, H, D, &cv[k, 0, 0],
                 t - t0, (t - t_first) / t_span, &z[0], &inp[0], &cur[0], &nxt[0], &F[0], &dx[0], &k1[0])
            for r in range(H):
                zt[r] = z[r] + 0.5 * h * k1[r]
            _rhs(&Wv[0], &bv[0], &dv[0], &av[0], n_layers, H, D, &cv[k, 0, 0],
                 t + 0.5 * h - t0, (t + 0.5 * h - t_first) / t_span, &zt[0], &inp[0], &cur[0], &nxt[0], &F[0], &dx[0], &k2[0])
            for r in range(H):
                zt[r] = z[r] + 0.5 * h * k2[r]
            _rhs(&Wv[0], &bv[0], &dv[0], &av[0], n_layers, H, D, &cv[k, 0, 0],
                 t + 0.5 * h - t0, (t + 0.5 * h - t_first) / t_span, &zt[0], &inp[0], &cur[0], &nxt[0], &F[0], &dx[0], &k3[0])
            for r in range(H):
                zt[r] = z[r] + h * k3[r]
            _rhs(&Wv[0], &bv[0], &dv[0], &av[0], n_layers, H, D, &cv[k, 0, 0],
                 t + h - t0, (t + h - t_first) / t_span, &zt[0], &inp[0], &cur[0], &nxt[0], &F[0], &dx[0], &k4[0])
            for r in range(H):
                z[r] = z[r] + (h / 6.0) * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r])
        ok = True
        for r in range(H):
            if not isfinite(z[r]):
                ok = False
        if not ok:
            states[k + 1:] = np.nan
            return states, k
        for r in range(H):
            sv[k + 1, r] = z[r]
    return states, -1
