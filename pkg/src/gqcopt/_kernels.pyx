# Compiled kernels. Semantics match gqcopt._kernels_py exactly.
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()

BACKEND = "compiled"


cdef inline void _block_softmax(const double[::1] z, Py_ssize_t lo, Py_ssize_t hi,
                                double[::1] log_p, double[::1] p) noexcept nogil:
    cdef Py_ssize_t j
    cdef double zmax = -INFINITY
    cdef double s = 0.0
    cdef double lse
    for j in range(lo, hi):
        if z[j] > zmax:
            zmax = z[j]
    for j in range(lo, hi):
        s += exp(z[j] - zmax)
    lse = log(s)
    for j in range(lo, hi):
        log_p[j] = (z[j] - zmax) - lse
        p[j] = exp(log_p[j])


def tilted_softmax(log_g, f, offsets, double a, double b):
    cdef const double[::1] lg = np.ascontiguousarray(log_g, dtype=np.float64)
    cdef const double[::1] ff = np.ascontiguousarray(f, dtype=np.float64)
    cdef const cnp.int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t n = lg.shape[0]
    cdef Py_ssize_t d = off.shape[0] - 1
    cdef Py_ssize_t i, j
    out_log = np.empty(n, dtype=np.float64)
    out_p = np.empty(n, dtype=np.float64)
    z_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] lp = out_log
    cdef double[::1] p = out_p
    cdef double[::1] z = z_arr
    with nogil:
        if a == 0.0:
            for j in range(n):
                z[j] = -b * ff[j]
        else:
            for j in range(n):
                z[j] = a * lg[j] - b * ff[j]
        for i in range(d):
            _block_softmax(z, off[i], off[i + 1], lp, p)
    return out_log, out_p


cdef inline void _softmax_into(double[::1] z, double[::1] out) noexcept nogil:
    cdef Py_ssize_t j, n = z.shape[0]
    cdef double zmax = -INFINITY
    cdef double s = 0.0
    for j in range(n):
        if z[j] > zmax:
            zmax = z[j]
    for j in range(n):
        out[j] = exp(z[j] - zmax)
        s += out[j]
    for j in range(n):
        out[j] /= s


cdef inline void _apply(const double[:, ::1] A, double[::1] x, double[::1] y,
                        double[::1] fx, double[::1] fy) noexcept nogil:
    # fx = A y, fy = -A^T x
    cdef Py_ssize_t i, k, n = A.shape[0], m = A.shape[1]
    cdef double acc
    for k in range(m):
        fy[k] = 0.0
    for i in range(n):
        acc = 0.0
        for k in range(m):
            acc += A[i, k] * y[k]
            fy[k] -= A[i, k] * x[i]
        fx[i] = acc


cdef inline double _gap_from_ops(double[::1] fx, double[::1] fy) noexcept nogil:
    cdef Py_ssize_t j
    cdef double hi = -INFINITY, lo = INFINITY
    for j in range(fy.shape[0]):
        if -fy[j] > hi:
            hi = -fy[j]
    for j in range(fx.shape[0]):
        if fx[j] < lo:
            lo = fx[j]
    return hi - lo


cdef inline void _shift_max(double[::1] v) noexcept nogil:
    cdef Py_ssize_t j
    cdef double vmax = -INFINITY
    for j in range(v.shape[0]):
        if v[j] > vmax:
            vmax = v[j]
    for j in range(v.shape[0]):
        v[j] -= vmax


def omwu_solve(A_in, double eta, double tol, long max_iters, long check_every,
               log_gx, log_gy):
    cdef const double[:, ::1] A = np.ascontiguousarray(A_in, dtype=np.float64)
    cdef Py_ssize_t n = A.shape[0], m = A.shape[1]
    cdef Py_ssize_t i, j
    lgx_arr = np.array(log_gx, dtype=np.float64)
    lgy_arr = np.array(log_gy, dtype=np.float64)
    cdef double[::1] lgx = lgx_arr
    cdef double[::1] lgy = lgy_arr
    x_arr = np.empty(n)
    y_arr = np.empty(m)
    cdef double[::1] x = x_arr
    cdef double[::1] y = y_arr
    cdef double[::1] fx = np.empty(n)
    cdef double[::1] fy = np.empty(m)
    cdef double[::1] zx = np.empty(n)
    cdef double[::1] zy = np.empty(m)
    cdef double[::1] sx = np.zeros(n)
    cdef double[::1] sy = np.zeros(m)
    cdef double[::1] xa = np.empty(n)
    cdef double[::1] ya = np.empty(m)
    cdef double[::1] ga = np.empty(n)
    cdef double[::1] gb = np.empty(m)
    bx_arr = np.empty(n)
    by_arr = np.empty(m)
    cdef double[::1] bx = bx_arr
    cdef double[::1] by = by_arr
    cdef double best, gap, inv_t
    cdef long t, done = 0
    cdef bint converged = False

    with nogil:
        _softmax_into(lgx, x)
        _softmax_into(lgy, y)
        _apply(A, x, y, fx, fy)
        best = _gap_from_ops(fx, fy)
        bx[:] = x
        by[:] = y
        if best <= tol:
            converged = True
        t = 1
        while not converged and t <= max_iters:
            for j in range(n):
                zx[j] = lgx[j] - eta * fx[j]
            for j in range(m):
                zy[j] = lgy[j] - eta * fy[j]
            _softmax_into(zx, x)
            _softmax_into(zy, y)
            _apply(A, x, y, fx, fy)
            for j in range(n):
                lgx[j] -= eta * fx[j]
                sx[j] += x[j]
            for j in range(m):
                lgy[j] -= eta * fy[j]
                sy[j] += y[j]
            _shift_max(lgx)
            _shift_max(lgy)
            gap = _gap_from_ops(fx, fy)
            if gap < best:
                best = gap
                bx[:] = x
                by[:] = y
            if t % check_every == 0:
                inv_t = 1.0 / t
                for j in range(n):
                    xa[j] = sx[j] * inv_t
                for j in range(m):
                    ya[j] = sy[j] * inv_t
                _apply(A, xa, ya, ga, gb)
                gap = _gap_from_ops(ga, gb)
                if gap < best:
                    best = gap
                    bx[:] = xa
                    by[:] = ya
            done = t
            if best <= tol:
                converged = True
            t += 1
    return bx_arr, by_arr, best, done, lgx_arr, lgy_arr, bool(converged)


def game_operator(Q_in, x_in, y_in):
    cdef const double[:, :, ::1] Q = np.ascontiguousarray(Q_in, dtype=np.float64)
    cdef const double[:, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef const double[:, ::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t S = Q.shape[0], nA = Q.shape[1], nB = Q.shape[2]
    cdef Py_ssize_t s, a, b
    cdef double acc
    fx_arr = np.empty((S, nA))
    fy_arr = np.zeros((S, nB))
    cdef double[:, ::1] fx = fx_arr
    cdef double[:, ::1] fy = fy_arr
    with nogil:
        for s in range(S):
            for a in range(nA):
                acc = 0.0
                for b in range(nB):
                    acc += Q[s, a, b] * y[s, b]
                    fy[s, b] -= Q[s, a, b] * x[s, a]
                fx[s, a] = acc
    return fx_arr, fy_arr


def game_p_map(sigma_in, P_in, Q_in, x_in, y_in, double theta):
    cdef const double[:, :, ::1] sigma = np.ascontiguousarray(sigma_in, dtype=np.float64)
    cdef const double[:, :, :, ::1] P = np.ascontiguousarray(P_in, dtype=np.float64)
    cdef const double[:, :, ::1] Q = np.ascontiguousarray(Q_in, dtype=np.float64)
    cdef const double[:, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef const double[:, ::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t S = Q.shape[0], nA = Q.shape[1], nB = Q.shape[2]
    cdef Py_ssize_t s, a, b, s2
    cdef double acc, row
    v_arr = np.zeros(S)
    out_arr = np.empty((S, nA, nB))
    cdef double[::1] v = v_arr
    cdef double[:, :, ::1] out = out_arr
    with nogil:
        for s in range(S):
            acc = 0.0
            for a in range(nA):
                row = 0.0
                for b in range(nB):
                    row += Q[s, a, b] * y[s, b]
                acc += x[s, a] * row
            v[s] = acc
        for s in range(S):
            for a in range(nA):
                for b in range(nB):
                    acc = 0.0
                    for s2 in range(S):
                        acc += P[s, a, b, s2] * v[s2]
                    out[s, a, b] = (1.0 - theta) * sigma[s, a, b] + theta * acc
    return out_arr
