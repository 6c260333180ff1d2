"""Randomized checks of the simplex inequalities and sequence identities the analysis relies on.

Each check returns a PropertyResult whose ``worst`` is the largest defect
seen (how far the sampled cases came from violating, positive = violated,
after the stated tolerance). ``run_all`` backs the CLI property suite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diagnostics as dg
from .simplex_core import chi_squared, kl_divergence, kl_prox, regularized_kl_prox, variance_under


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    cases: int
    worst: float

    def line(self) -> str:
        return f"{self.name}: {'PASS' if self.passed else 'FAIL'} cases={self.cases} worst_defect={self.worst:.3e}"


def _pair(rng):
    n = int(rng.integers(2, 11))
    alpha = float(rng.choice([0.3, 1.0, 3.0]))
    return rng.dirichlet(np.full(n, alpha)), rng.dirichlet(np.full(n, alpha))


def pinsker(rng, cases=1000):
    """KL(p||q) >= 1/2 |p - q|_1^2."""
    worst = -np.inf
    for _ in range(cases):
        p, q = _pair(rng)
        worst = max(worst, 0.5 * np.sum(np.abs(p - q)) ** 2 - kl_divergence(p, q))
    return PropertyResult("pinsker", worst <= 1e-12, cases, worst)


def kl_prox_three_point(rng, cases=1000, tol=1e-9):
    """<p* - p, f> = (KL(p||q) - KL(p||p*) - KL(p*||q)) / eta for p* = kl_prox(q, f, eta)."""
    worst = 0.0
    for _ in range(cases):
        p, q = _pair(rng)
        f = rng.uniform(-1, 1, size=p.size)
        eta = float(rng.uniform(0.1, 2.0))
        ps = kl_prox(q, f, eta)
        lhs = float((ps - p) @ f)
        rhs = (kl_divergence(p, q) - kl_divergence(p, ps) - kl_divergence(ps, q)) / eta
        worst = max(worst, abs(lhs - rhs))
    return PropertyResult("kl_prox_three_point", worst <= tol, cases, worst)


def chi_squared_kl(rng, cases=1000):
    """KL(p||q) >= ((1-tau)/2 - 2tau/(3(1-tau))) chi2(p, q) whenever |p/q|_inf <= 1 + tau <= 1.3."""
    worst = -np.inf
    done = 0
    while done < cases:
        n = int(rng.integers(2, 9))
        q = rng.dirichlet(np.ones(n))
        t0 = float(rng.uniform(0.01, 0.3))
        lo = 0.0 if done % 2 else 1 - t0
        p = q * rng.uniform(lo, 1 + t0, size=n)
        p /= p.sum()
        tau = float(np.max(p / q) - 1)
        if not 0 < tau <= 0.3:
            continue
        chi = chi_squared(p, q)
        bound = ((1 - tau) / 2 - 2 * tau / (3 * (1 - tau))) * chi
        worst = max(worst, bound - kl_divergence(p, q) - 1e-12 * chi)
        done += 1
    return PropertyResult("chi_squared_kl", worst <= 1e-15, cases, worst)


def variance_chi_squared(rng, cases=1000):
    """(1 -+ (2/(3(1-tau)) + 4) tau) Var_p(r) brackets chi2(p~, p) for |r|_inf <= tau/2."""
    worst = -np.inf
    for _ in range(cases):
        n = int(rng.integers(2, 9))
        p = rng.dirichlet(np.ones(n))
        tau = float(rng.uniform(1e-3, 0.3))
        r = rng.uniform(-tau / 2, tau / 2, size=n)
        pt = p * np.exp(r)
        pt /= pt.sum()
        chi = chi_squared(pt, p)
        var = variance_under(p, r)
        k = (2 / (3 * (1 - tau)) + 4) * tau
        slack = 1e-12 * var + 1e-300
        worst = max(worst, (1 - k) * var - chi - slack, chi - (1 + k) * var - slack)
    return PropertyResult("variance_chi_squared", worst <= 0, cases, worst)


def kl_prox_shift_invariance(rng, cases=1000, tol=1e-14):
    """kl_prox(g, f + c) = kl_prox(g, f)."""
    worst = 0.0
    for _ in range(cases):
        g, _ = _pair(rng)
        f = rng.uniform(-1, 1, size=g.size)
        eta = float(rng.uniform(0.01, 2.0))
        c = float(rng.uniform(-5, 5))
        worst = max(worst, float(np.max(np.abs(kl_prox(g, f + c, eta) - kl_prox(g, f, eta)))))
    return PropertyResult("kl_prox_shift_invariance", worst <= tol, cases, worst)


def regularized_prox_stationarity(rng, cases=1000, tol=1e-9):
    """eta f + gamma log(p/g) + lam log p is constant across coordinates at the prox point."""
    worst = 0.0
    for _ in range(cases):
        g, _ = _pair(rng)
        f = rng.uniform(-1, 1, size=g.size)
        eta = float(rng.uniform(0.01, 2.0))
        gam = float(rng.uniform(0, 1))
        lam = 1 - gam
        p = regularized_kl_prox(g, f, eta, gam, lam)
        grad = eta * f + gam * (np.log(p) - np.log(g)) + lam * np.log(p)
        worst = max(worst, float(np.ptp(grad)))
    return PropertyResult("regularized_prox_stationarity", worst <= tol, cases, worst)


def g_series(rng=None, cases=None):
    """Partial sums of g(Gamma) stay under 80640/(Gamma-1) + 2/(Gamma e^-2 - 1)."""
    worst = -np.inf
    grid = (17.0, 32.0, 100.0)
    for G in grid:
        worst = max(worst, dg.g_partial_sum(G, 60) - dg.g_series_bound(G))
    return PropertyResult("g_series_bound", worst <= 0, len(grid), worst)


def _random_sequence(rng, T=None, n=None):
    T = int(rng.integers(8, 30)) if T is None else T
    n = int(rng.integers(1, 6)) if n is None else n
    return rng.uniform(-1, 1, size=(T + 1, n))


def finite_difference_closed_form(rng, cases=1000, tol=1e-12):
    """Repeated differencing equals the compensated binomial closed form."""
    worst = 0.0
    for _ in range(cases):
        L = _random_sequence(rng)
        h = int(rng.integers(0, 8))
        rec = L
        for _ in range(h):
            rec = rec[1:] - rec[:-1]
        worst = max(worst, float(np.max(np.abs(dg.finite_difference(L, h) - rec))))
    return PropertyResult("finite_difference_closed_form", worst <= tol, cases, worst)


def finite_difference_linearity(rng, cases=1000, tol=1e-12):
    worst = 0.0
    for _ in range(cases):
        L = _random_sequence(rng)
        M = _random_sequence(rng, L.shape[0] - 1, L.shape[1])
        a, b = rng.uniform(-2, 2, size=2)
        h = int(rng.integers(0, 8))
        lhs = dg.finite_difference(a * L + b * M, h)
        rhs = a * dg.finite_difference(L, h) + b * dg.finite_difference(M, h)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return PropertyResult("finite_difference_linearity", worst <= tol, cases, worst)


def finite_difference_composition(rng, cases=1000, tol=1e-12):
    """D_{h1}(D_{h2} L) = D_{h1+h2} L."""
    worst = 0.0
    for _ in range(cases):
        L = _random_sequence(rng)
        h1, h2 = (int(v) for v in rng.integers(0, 5, size=2))
        lhs = dg.finite_difference(dg.finite_difference(L, h2), h1)
        worst = max(worst, float(np.max(np.abs(lhs - dg.finite_difference(L, h1 + h2)))))
    return PropertyResult("finite_difference_composition", worst <= tol, cases, worst)


def shift_commutes(rng, cases=1000):
    """E_s D_h = D_h E_s and E_a E_b = E_{a+b}, exactly."""
    worst = 0.0
    for _ in range(cases):
        L = _random_sequence(rng)
        h, s = (int(v) for v in rng.integers(0, 4, size=2))
        a = dg.shift(dg.finite_difference(L, h), s)
        b = dg.finite_difference(dg.shift(L, s), h)
        c = dg.shift(dg.shift(L, s), h)
        worst = max(worst, float(np.max(np.abs(a - b))), float(np.max(np.abs(c - dg.shift(L, s + h)))))
    return PropertyResult("shift_commutes", worst == 0.0, cases, worst)


def closeness_reversal(rng, cases=1000):
    """Consecutive closeness is symmetric under reversing the sequence."""
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(2, 6))
        seq = rng.dirichlet(np.ones(n), size=int(rng.integers(2, 10)))
        worst = max(worst, abs(dg.consecutive_closeness(seq) - dg.consecutive_closeness(seq[::-1])))
    return PropertyResult("closeness_reversal", worst == 0.0, cases, worst)


def beta_sandwich(rng=None, cases=None):
    """Lower and upper envelopes bracket the raw averaging weights beta_{T,t} (c' = c)."""
    worst = -np.inf
    n = 0
    for theta in (0.0, 0.5, 0.8, 0.9, 0.95):
        c = 2 / (1 - theta)
        for T in (10, 100):
            w = dg.beta_weights(c, T)
            lo, hi = dg.beta_sandwich(c, T)
            worst = max(worst, float(np.max(lo - w)), float(np.max(w - hi)))
            n += T
    return PropertyResult("beta_sandwich", worst <= 0, n, worst)


ALL_CHECKS = (
    pinsker, kl_prox_three_point, chi_squared_kl, variance_chi_squared,
    kl_prox_shift_invariance, regularized_prox_stationarity, g_series,
    finite_difference_closed_form, finite_difference_linearity, finite_difference_composition,
    shift_commutes, closeness_reversal, beta_sandwich,
)


def run_all(seed: int = 0, cases: int = 1000) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for check in ALL_CHECKS:
        if check in (g_series, beta_sandwich):
            out.append(check())
        else:
            out.append(check(rng, cases))
    return out
