"""Chernoff-type tail bounds for Markov chains and exact/Monte-Carlo tail oracles."""
from __future__ import annotations

import math
from fractions import Fraction
from functools import reduce

import numpy as np

from .errors import MeanOutOfRange, RewardsNotLatticed, StateSpaceTooLarge
from .family import ExpFamily
from .markov import simulate_many
from .rng import stream

MAX_DENOMINATOR = 10_000
MAX_CELLS = 10_000_000
# float thresholds are snapped to nearby short fractions before comparison
SNAP_DENOMINATOR = 1_000_000
SNAP_TOL = 1e-12


def _initial(family: ExpFamily, q):
    if q is None:
        return np.asarray(family.q)
    q = np.asarray(q, dtype=float)
    if q.shape != (family.n,) or np.any(q < 0) or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("q must be a probability vector over the states")
    return q


def log_mgf_n(family: ExpFamily, theta_member: float, eta: float, n: int, q=None) -> float:
    """Finite-horizon scaled log-MGF of ``f(X_1) + ... + f(X_n)`` under ``P_theta``.

    ``A_n(eta) = (1/n) log sum_{x0, xn} q(x0) T^n(x0, xn)`` where ``T`` is the
    ``eta``-tilt of the member kernel.  Computed by ``n`` vector-matrix
    products with per-step renormalization.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    q = _initial(family, q)
    base = family.regenerate(theta_member) if theta_member != 0 else family
    eta = float(eta)
    ref = base.M if eta > 0 else (base.m if eta < 0 else 0.0)
    T = base.P * np.exp(eta * (base.f - ref))[None, :]
    w = q.copy()
    total = 0.0
    for _ in range(n):
        w = w @ T
        s = w.sum()
        total += math.log(s)
        w /= s
    return total / n + eta * ref


def _checked_mean(family, theta, mu, upper):
    mu_theta = family.mean(theta)
    if upper and not mu_theta <= mu <= family.M:
        raise MeanOutOfRange(f"upper tail needs mu in [{mu_theta}, {family.M}], got {mu}")
    if not upper and not family.m <= mu <= mu_theta:
        raise MeanOutOfRange(f"lower tail needs mu in [{family.m}, {mu_theta}], got {mu}")
    return mu_theta


def _divergence_to(family, theta, mu):
    # KL(mu || mu(theta)) = A*(mu) - theta mu + A(theta); avoids re-inverting mu(theta)
    theta, mu = float(theta), float(mu)
    if mu == family.mean(theta):
        return 0.0
    return max(family.conjugate(mu) - theta * mu + family.log_pf(theta), 0.0)


def tail_bound(family: ExpFamily, theta: float, n: int, mu: float) -> float:
    """Upper bound ``C^2 exp(-n KL(mu || mu(theta)))`` on ``Pr(f(X_1)+...+f(X_n) >= n mu)``.

    The raw value is returned; it may exceed one.
    """
    _checked_mean(family, theta, float(mu), upper=True)
    C = family.ratio_constant()
    return C * C * math.exp(-n * _divergence_to(family, theta, mu))


def tail_bound_lower(family: ExpFamily, theta: float, n: int, mu: float) -> float:
    """Upper bound ``C^2 exp(-n KL(mu || mu(theta)))`` on ``Pr(f(X_1)+...+f(X_n) <= n mu)``."""
    _checked_mean(family, theta, float(mu), upper=False)
    C = family.ratio_constant()
    return C * C * math.exp(-n * _divergence_to(family, theta, mu))


def lattice(values):
    """Integer rewards ``g`` and scale ``L`` with ``f = g / L`` exactly.

    Raises
    ------
    RewardsNotLatticed
        If some reward is not a fraction with denominator at most 10^4.
    """
    fracs = []
    for x in values:
        fr = Fraction(float(x)).limit_denominator(MAX_DENOMINATOR)
        if abs(float(fr) - float(x)) > 1e-12 * max(1.0, abs(float(x))):
            raise RewardsNotLatticed(f"reward {x!r} is not on a grid with denominator <= {MAX_DENOMINATOR}")
        fracs.append(fr)
    L = reduce(math.lcm, (fr.denominator for fr in fracs), 1)
    return np.array([int(fr * L) for fr in fracs], dtype=np.int64), L


def _as_fraction(mu) -> Fraction:
    if isinstance(mu, Fraction):
        return mu
    exact = Fraction(float(mu))
    snapped = exact.limit_denominator(SNAP_DENOMINATOR)
    return snapped if abs(float(snapped) - float(mu)) <= SNAP_TOL * max(1.0, abs(float(mu))) else exact


def _sum_distribution(kernel, q, g, n):
    # law of (X_n, g(X_1) + ... + g(X_n) - n min g) as an (states, sums) array
    g0 = g - g.min()
    width = int(n * g0.max()) + 1
    cells = len(g) * width
    if cells > MAX_CELLS:
        raise StateSpaceTooLarge(f"lattice needs {cells} cells (limit {MAX_CELLS})")
    dist = np.zeros((len(g), width))
    dist[:, 0] = q
    for _ in range(n):
        moved = kernel.T @ dist
        dist = np.zeros_like(dist)
        for y, shift in enumerate(g0):
            dist[y, shift:] = moved[y, : width - shift]
    return dist.sum(axis=0), int(n * g.min())


def exact_tail(family: ExpFamily, theta: float, n: int, mu, q=None, upper: bool = True) -> float:
    """Exact ``Pr(f(X_1) + ... + f(X_n) >= n mu)`` (or ``<=`` with ``upper=False``).

    ``X_0 ~ q`` and the chain moves with ``P_theta``; ``X_0`` is not summed.
    Dynamic programming over (state, integer partial sum) on the reward
    lattice; the threshold ``n mu`` is compared exactly as a rational.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    g, L = lattice(family.f)
    q = _initial(family, q)
    kernel = family.member(theta).kernel
    probs, offset = _sum_distribution(kernel, q, g, n)
    target = _as_fraction(mu) * n * L
    sums = np.arange(len(probs)) + offset
    if upper:
        k = math.ceil(target)
        mask = sums >= k
    else:
        k = math.floor(target)
        mask = sums <= k
    return float(min(probs[mask].sum(), 1.0))


def mc_tail(family: ExpFamily, theta: float, n: int, mu, reps: int, seed: int, q=None, upper: bool = True):
    """Monte-Carlo estimate of the tail probability and its standard error.

    Returns ``(estimate, stderr)``; deterministic given ``seed``.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    q = _initial(family, q)
    kernel = family.member(theta).kernel
    paths = simulate_many(kernel, q, n, reps, stream(seed, "mc_tail"))
    try:
        g, L = lattice(family.f)
        sums = g[paths[:, 1:]].sum(axis=1)
        target = _as_fraction(mu) * n * L
        hits = sums >= math.ceil(target) if upper else sums <= math.floor(target)
    except RewardsNotLatticed:
        sums = family.f[paths[:, 1:]].sum(axis=1)
        hits = sums >= n * mu if upper else sums <= n * mu
    p = float(hits.mean())
    return p, math.sqrt(p * (1.0 - p) / reps)
