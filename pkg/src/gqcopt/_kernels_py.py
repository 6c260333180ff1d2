"""Pure-numpy kernels.

Same signatures and semantics as the compiled ``_kernels`` extension. Used
when the extension is not built, or when ``GQCOPT_PURE_PYTHON`` is set.
"""
import numpy as np

BACKEND = "python"


def tilted_softmax(log_g, f, offsets, a, b):
    """Blockwise ``log p ∝ a*log_g - b*f`` normalized in the log domain.

    Returns ``(log_p, p)`` as flat arrays aligned with ``offsets``.
    """
    log_g = np.asarray(log_g, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    starts = np.asarray(offsets[:-1], dtype=np.intp)
    sizes = np.diff(offsets)
    z = -b * f if a == 0.0 else a * log_g - b * f
    zmax = np.repeat(np.maximum.reduceat(z, starts), sizes)
    z = z - zmax
    lse = np.repeat(np.log(np.add.reduceat(np.exp(z), starts)), sizes)
    log_p = z - lse
    return log_p, np.exp(log_p)


def _softmax(z):
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def omwu_solve(A, eta, tol, max_iters, check_every, log_gx, log_gy):
    """Optimistic multiplicative weights self-play on the cost matrix ``A``.

    The row player minimizes ``x^T A y`` and the column player maximizes it.
    Both the last iterate and the running uniform average are monitored. The
    pair with the smallest exact duality gap is returned as
    ``(x, y, gap, iterations, log_gx, log_gy, converged)``. The two log
    arrays are the final prox centers and can seed a later solve.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    lgx = np.array(log_gx, dtype=np.float64)
    lgy = np.array(log_gy, dtype=np.float64)
    x = _softmax(lgx)
    y = _softmax(lgy)
    fx = A @ y
    fy = -(A.T @ x)
    best = float(np.max(-fy) - np.min(fx))
    bx, by = x, y
    if best <= tol:
        return bx, by, best, 0, lgx, lgy, True
    sx = np.zeros_like(x)
    sy = np.zeros_like(y)
    for t in range(1, max_iters + 1):
        x = _softmax(lgx - eta * fx)
        y = _softmax(lgy - eta * fy)
        fx = A @ y
        fy = -(A.T @ x)
        lgx -= eta * fx
        lgx -= lgx.max()
        lgy -= eta * fy
        lgy -= lgy.max()
        sx += x
        sy += y
        gap = float(np.max(-fy) - np.min(fx))
        if gap < best:
            best, bx, by = gap, x, y
        if t % check_every == 0:
            xa = sx / t
            ya = sy / t
            gap = float(np.max(xa @ A) - np.min(A @ ya))
            if gap < best:
                best, bx, by = gap, xa, ya
        if best <= tol:
            return bx, by, best, t, lgx, lgy, True
    return bx, by, best, max_iters, lgx, lgy, False


def game_operator(Q, x, y):
    """Per-state ``(Q_s y_s, -Q_s^T x_s)`` for ``Q`` of shape (S, A, B)."""
    fx = np.einsum("sab,sb->sa", Q, y)
    fy = -np.einsum("sab,sa->sb", Q, x)
    return fx, fy


def game_p_map(sigma, P, Q, x, y, theta):
    """``(1-theta)*sigma + theta * P @ v`` where ``v_s = x_s^T Q_s y_s``."""
    v = np.einsum("sab,sa,sb->s", Q, x, y)
    return (1.0 - theta) * sigma + theta * (P @ v)
