"""Characteristic time ``T*`` and optimal sampling proportions ``w*``.

For weights ``w`` the game value is

    G(w) = min_{b != a*} (w_a* + w_b) I_{w_a* / (w_a* + w_b)}(mu_a*, mu_b)

where ``I_alpha`` is the generalized Jensen-Shannon divergence of the
family.  ``T* = 1 / max_w G(w)``.

The maximizer is found by the nested scalar root-finding characterization of
optimal proportions: all pairwise terms are
equalized at a common level ``y`` fixed by one monotone scalar equation.
Two arms reduce to a closed form.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import rel_entr

from .errors import MeanOutOfRange, NoUniqueBest
from .family import ExpFamily

ROOT_XTOL = 1e-15
ROOT_RTOL = 4 * np.finfo(float).eps


def binary_kl(p: float, q: float) -> float:
    """``p log(p/q) + (1-p) log((1-p)/(1-q))`` with ``0 log 0 = 0``."""
    return float(rel_entr(p, q) + rel_entr(1.0 - p, 1.0 - q))


def _interior(family, mu):
    if not family.m < mu < family.M:
        raise MeanOutOfRange(f"mean {mu!r} must lie in ({family.m}, {family.M})")


def jensen_shannon(alpha_w: float, mu1: float, mu2: float, family: ExpFamily) -> float:
    """Generalized Jensen-Shannon divergence ``I_alpha(mu1, mu2)``.

    ``alpha KL(mu1 || xbar) + (1 - alpha) KL(mu2 || xbar)`` at the weighted
    mean ``xbar = alpha mu1 + (1 - alpha) mu2``.
    """
    mu1, mu2, a = float(mu1), float(mu2), float(alpha_w)
    _interior(family, mu1)
    _interior(family, mu2)
    if not 0.0 <= a <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if a in (0.0, 1.0) or mu1 == mu2:
        return 0.0
    xbar = a * mu1 + (1.0 - a) * mu2
    return a * family.kl_rate_mean(mu1, xbar) + (1.0 - a) * family.kl_rate_mean(mu2, xbar)


def best_arm(means) -> int:
    means = np.asarray(means, dtype=float)
    top = np.flatnonzero(means == means.max())
    if len(top) != 1:
        raise NoUniqueBest(f"arms {top.tolist()} share the largest mean {means.max()!r}")
    return int(top[0])


def game_value(w, means, family: ExpFamily, duals=None) -> float:
    """``G(w)``: the worst pairwise weighted divergence against the best arm."""
    w = np.asarray(w, dtype=float)
    means = np.asarray(means, dtype=float)
    a = best_arm(means)
    for mu in means:
        _interior(family, mu)
    arms = duals if isinstance(duals, _Arms) else _Arms(family, means, duals)
    value = math.inf
    for b in range(len(means)):
        if b == a:
            continue
        s = w[a] + w[b]
        if s <= 0.0 or w[a] == 0.0 or w[b] == 0.0 or means[a] == means[b]:
            term = 0.0
        else:
            x = (w[a] * means[a] + w[b] * means[b]) / s
            t, _, A = arms.core.dual(x)
            term = w[a] * arms.kl_to(a, t, A) + w[b] * arms.kl_to(b, t, A)
        value = min(value, term)
    return value


class _Arms:
    # per-arm (theta, A*) cache; KL(mu_i || mu(t)) = A*(mu_i) - t mu_i + A(t)
    def __init__(self, family, means, duals=None):
        self.core = family.core
        self.means = [float(x) for x in means]
        if duals is None:
            duals = []
            for mu in self.means:
                theta, conj, _ = self.core.dual(mu)
                duals.append((theta, conj))
        self.theta = [d[0] for d in duals]
        self.conj = [d[1] for d in duals]

    def kl_to(self, i, t, A):
        return max(self.conj[i] - t * self.means[i] + A, 0.0)


def _two_arms(arms, a, b):
    mu1, mu2 = arms.means[a], arms.means[b]
    # equal divergences to the crossing member: KL(mu1||x) = KL(mu2||x)
    t = (arms.conj[a] - arms.conj[b]) / (mu1 - mu2)
    A, x = arms.core.evaluate(t)
    alpha = (x - mu2) / (mu1 - mu2)
    value = arms.kl_to(a, t, A)
    return min(max(alpha, 0.0), 1.0), value


def _level_crossing(arms, a, b, y):
    # crossing parameter t in (theta_b, theta_a) where KL(mu_a||m) + x KL(mu_b||m) = y,
    # with m = mu(t) and x = (mu_a - m) / (m - mu_b)
    mu1, mub = arms.means[a], arms.means[b]

    def g(t):
        A, m = arms.core.evaluate(t)
        if m <= mub:
            return arms.kl_to(a, t, A) - y
        x = (mu1 - m) / (m - mub)
        return arms.kl_to(a, t, A) + x * arms.kl_to(b, t, A) - y

    lo, hi = arms.theta[b], arms.theta[a]
    if not math.isfinite(lo) or not math.isfinite(hi):
        raise MeanOutOfRange("optimal weights need interior means")
    t = brentq(g, lo, hi, xtol=ROOT_XTOL, rtol=ROOT_RTOL)
    A, m = arms.core.evaluate(t)
    x = (mu1 - m) / (m - mub)
    return t, A, m, x


def optimal_weights(family: ExpFamily, means, duals=None):
    """Optimal proportions ``w*`` and characteristic time ``T*``.

    Parameters
    ----------
    family : ExpFamily
    means : sequence of float
        Arm means, all in ``(m, M)``, with a unique maximum.
    duals : sequence of (theta, A*) pairs, optional
        Precomputed ``theta(mu_a)`` and ``A*(mu_a)``; saves inversions.

    Returns
    -------
    w : ndarray
        Point of the simplex maximizing ``G``.
    T : float
        ``1 / G(w)``.

    Raises
    ------
    NoUniqueBest
        If the largest mean is shared.
    """
    means = np.asarray(means, dtype=float)
    if len(means) < 2:
        raise ValueError("need at least two arms")
    a = best_arm(means)
    for mu in means:
        _interior(family, mu)
    arms = _Arms(family, means, duals)
    K = len(means)
    w = np.zeros(K)
    if K == 2:
        b = 1 - a
        alpha, value = _two_arms(arms, a, b)
        w[a], w[b] = alpha, 1.0 - alpha
        return w, 1.0 / value

    others = [b for b in range(K) if b != a]
    ymax = min(arms.kl_to(a, arms.theta[b], family.core.evaluate(arms.theta[b])[0]) for b in others)

    def F(y):
        total = 0.0
        for b in others:
            t, A, _, _ = _level_crossing(arms, a, b, y)
            kb = arms.kl_to(b, t, A)
            if kb <= 0.0:
                return math.inf
            total += arms.kl_to(a, t, A) / kb
        return total - 1.0

    # F rises from -1 (y -> 0) to +inf (y -> ymax)
    hi = 0.5 * ymax
    while F(hi) <= 0.0:
        hi = ymax - 0.5 * (ymax - hi)
    y = brentq(lambda v: F(v) if v > 0.0 else -1.0, 0.0, hi, xtol=ROOT_XTOL, rtol=ROOT_RTOL)
    xs = {b: _level_crossing(arms, a, b, y)[3] for b in others}
    total = 1.0 + sum(xs.values())
    w[a] = 1.0 / total
    for b, x in xs.items():
        w[b] = x / total
    return w, total / y


def characteristic_time(family: ExpFamily, means) -> float:
    return optimal_weights(family, means)[1]


def simplex_grid(K: int, resolution: float):
    """All points of the simplex with coordinates on multiples of ``resolution``."""
    steps = int(round(1.0 / resolution))
    for head in itertools.product(range(steps + 1), repeat=K - 1):
        s = sum(head)
        if s <= steps:
            yield np.array(head + (steps - s,), dtype=float) / steps


def grid_search_weights(family: ExpFamily, means, resolution: float = 2e-3):
    """Brute-force maximizer of ``G`` over a simplex grid; an oracle for tests."""
    best_w, best_g = None, -math.inf
    arms = _Arms(family, means)
    for w in simplex_grid(len(means), resolution):
        g = game_value(w, means, family, arms)
        if g > best_g:
            best_w, best_g = w, g
    return best_w, best_g
