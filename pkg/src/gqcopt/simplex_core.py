"""Probability vectors, products of simplexes and the entropic prox steps."""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ._backend import kernels
from .errors import DomainError, ScheduleError

SUM_TOL = 1e-9


def as_prob_vector(w, *, name="p") -> np.ndarray:
    """Validate ``w`` as a probability vector and renormalize it exactly.

    Raises DomainError on negative entries or when the sum is off by more
    than ``SUM_TOL``.
    """
    p = np.array(w, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise DomainError(f"{name} must be a non-empty 1-d array")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise DomainError(f"{name} has negative or non-finite entries")
    s = p.sum()
    if abs(s - 1.0) > SUM_TOL:
        raise DomainError(f"{name} sums to {s!r}, not 1")
    return p / s


class ProductDistribution:
    """A point of a product of simplexes, possibly with unequal block sizes.

    Stored as one flat array plus block offsets so kernels can work on all
    blocks at once. Block ``i`` is ``flat[offsets[i]:offsets[i+1]]``.
    """

    __slots__ = ("flat", "offsets")

    def __init__(self, flat, offsets, *, validate=True):
        flat = np.array(flat, dtype=np.float64)
        offsets = np.asarray(offsets, dtype=np.int64)
        if offsets.ndim != 1 or offsets.size < 2 or offsets[0] != 0 or offsets[-1] != flat.size:
            raise DomainError("offsets must run from 0 to len(flat)")
        if np.any(np.diff(offsets) <= 0):
            raise DomainError("every block must be non-empty")
        if validate:
            if not np.all(np.isfinite(flat)) or np.any(flat < 0):
                raise DomainError("product distribution has negative or non-finite entries")
            sums = np.add.reduceat(flat, offsets[:-1])
            bad = np.flatnonzero(np.abs(sums - 1.0) > SUM_TOL)
            if bad.size:
                raise DomainError(f"block {int(bad[0])} sums to {sums[bad[0]]!r}, not 1")
            flat = flat / np.repeat(sums, np.diff(offsets))
        flat.setflags(write=False)
        offsets.setflags(write=False)
        self.flat = flat
        self.offsets = offsets

    @classmethod
    def uniform(cls, sizes: Sequence[int]) -> "ProductDistribution":
        sizes = np.asarray(sizes, dtype=np.int64)
        flat = np.repeat(1.0 / sizes, sizes)
        return cls(flat, np.concatenate([[0], np.cumsum(sizes)]), validate=False)

    @classmethod
    def from_blocks(cls, blocks) -> "ProductDistribution":
        blocks = [np.asarray(b, dtype=np.float64).ravel() for b in blocks]
        sizes = [b.size for b in blocks]
        return cls(np.concatenate(blocks), np.concatenate([[0], np.cumsum(sizes)]))

    @classmethod
    def from_matrix(cls, M) -> "ProductDistribution":
        M = np.asarray(M, dtype=np.float64)
        if M.ndim != 2:
            raise DomainError("expected a (blocks, size) matrix")
        d, n = M.shape
        return cls(M.ravel(), np.arange(d + 1) * n)

    @classmethod
    def coerce(cls, p) -> "ProductDistribution":
        """Accept a ProductDistribution, a stochastic matrix or a list of blocks."""
        if isinstance(p, cls):
            return p
        if isinstance(p, np.ndarray) and p.ndim == 2:
            return cls.from_matrix(p)
        return cls.from_blocks(p)

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def n_blocks(self) -> int:
        return self.offsets.size - 1

    def block(self, i: int) -> np.ndarray:
        return self.flat[self.offsets[i]:self.offsets[i + 1]]

    def blocks(self) -> list[np.ndarray]:
        return [self.block(i) for i in range(self.n_blocks)]

    def as_matrix(self) -> np.ndarray:
        sizes = self.sizes
        if np.any(sizes != sizes[0]):
            raise DomainError("blocks have different sizes")
        return self.flat.reshape(self.n_blocks, int(sizes[0]))

    def same_shape(self, other: "ProductDistribution") -> bool:
        return np.array_equal(self.offsets, other.offsets)

    def __repr__(self):
        return f"ProductDistribution(n_blocks={self.n_blocks}, sizes={self.sizes.tolist()})"


def _check_pair(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise DomainError("p and q have different shapes")
    return p, q


def kl_divergence(p, q) -> float:
    """KL(p || q) with the convention 0 log 0 = 0. Requires q > 0 wherever p > 0."""
    p, q = _check_pair(p, q)
    mask = p > 0
    if np.any(q[mask] <= 0):
        raise DomainError("q must be positive on the support of p")
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def chi_squared(p, q) -> float:
    """Chi-squared divergence sum_j (p_j - q_j)^2 / q_j. Requires q > 0."""
    p, q = _check_pair(p, q)
    if np.any(q <= 0):
        raise DomainError("q must be strictly positive")
    return float(np.sum((p - q) ** 2 / q))


def variance_under(p, v) -> float:
    """Variance of ``v`` under ``p``."""
    p, v = _check_pair(p, v)
    mean = float(p @ v)
    return float(p @ (v - mean) ** 2)


def neg_entropy(p) -> float:
    """sum_j p_j log p_j with 0 log 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(np.sum(nz * np.log(nz)))


def _log_positive(g, name):
    g = np.asarray(g, dtype=np.float64)
    if np.any(g < 0):
        raise DomainError(f"{name} has negative entries")
    with np.errstate(divide="ignore"):
        return np.log(g)


def _finite(f, n):
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (n,):
        raise DomainError("f and g have different shapes")
    if not np.all(np.isfinite(f)):
        raise DomainError("f has non-finite entries")
    return f


def kl_prox(g, f, eta) -> np.ndarray:
    """argmin_p <p, eta f> + KL(p || g), i.e. p ∝ g exp(-eta f).

    Computed in the log domain so large ``eta * f`` does not overflow.
    """
    if eta < 0:
        raise DomainError("eta must be non-negative")
    lg = _log_positive(g, "g")
    f = _finite(f, lg.size)
    _, p = kernels.tilted_softmax(lg, f, np.array([0, lg.size]), 1.0, float(eta))
    return p


def regularized_kl_prox(g, f, eta, gamma, lam) -> np.ndarray:
    """argmin_p <p, eta f> + gamma KL(p || g) + lam sum_j p_j log p_j.

    Closed form p ∝ g^(gamma/(gamma+lam)) exp(-eta f / (gamma+lam)).
    """
    if eta < 0 or gamma < 0 or lam < 0:
        raise DomainError("eta, gamma and lam must be non-negative")
    if gamma + lam <= 0:
        raise ScheduleError("gamma + lam must be positive")
    lg = _log_positive(g, "g")
    f = _finite(f, lg.size)
    s = gamma + lam
    _, p = kernels.tilted_softmax(lg, f, np.array([0, lg.size]), gamma / s, eta / s)
    return p


def product_prox(log_g, f, offsets, eta, gamma=1.0, lam=0.0):
    """Blockwise regularized prox on flat arrays. Returns ``(log_p, p)``.

    ``gamma=1, lam=0`` gives the plain KL prox. Working with ``log_g``
    keeps repeated updates exact even when entries underflow.
    """
    s = gamma + lam
    if s <= 0:
        raise ScheduleError("gamma + lam must be positive")
    return kernels.tilted_softmax(log_g, f, offsets, gamma / s, eta / s)
