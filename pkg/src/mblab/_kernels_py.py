"""Pure-Python hot kernels.

Same algorithms and call signatures as the compiled ``mblab._kernels``
module; :mod:`mblab._backend` picks one at import time.
"""
from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np

from .errors import MeanOutOfRange, NoConvergence

BACKEND = "python"

# Illinois inversion of the mean map.
MEAN_TOL = 1e-12
MAX_INVERSION_STEPS = 200
# tilt factors below exp(-700) are indistinguishable from the limit members
THETA_SPAN = 700.0


def power_iteration(M, tol=1e-12, max_iter=100_000, u0=None, v0=None):
    """Joint shifted power iteration for the Perron-Frobenius triple of ``M``.

    Iterates ``v <- (M + cI) v`` and ``u <- u (M + cI)`` with ``c`` the
    largest row sum, which makes the dominant eigenvalue strictly dominant
    even for periodic matrices.  Stops once the Collatz-Wielandt bracket on
    the right iterate and the left residual are both below ``tol``
    (relative).

    Returns ``(rho, u, v, residual, iterations)`` with ``sum(u) = 1`` and
    ``u @ v = 1``; ``residual`` is the larger of the two relative
    eigen-residuals of the returned pair.
    """
    M = np.ascontiguousarray(M, dtype=float)
    n = M.shape[0]
    c = float(M.sum(axis=1).max())
    if not c > 0.0:
        raise NoConvergence("zero matrix has no Perron-Frobenius vector", float("inf"))
    v = np.ones(n) if v0 is None else np.array(v0, dtype=float)
    u = np.full(n, 1.0 / n) if u0 is None else np.array(u0, dtype=float)
    u /= u.sum()
    gap = ru = float("inf")
    for it in range(1, max_iter + 1):
        wv = M @ v + c * v
        ratio = wv / v
        hi = ratio.max()
        gap = (hi - ratio.min()) / hi
        v = wv / wv.max()
        wu = u @ M + c * u
        s = wu.sum()
        ru = np.abs(wu - s * u).max() / s
        u = wu / s
        if gap <= tol and ru <= tol:
            break
    else:
        raise NoConvergence(
            f"power iteration did not converge in {max_iter} iterations", max(gap, ru)
        )
    return _finish(M, u, v, it)


def _finish(M, u, v, iterations):
    Mv = M @ v
    uv = float(u @ v)
    rho = float(u @ Mv) / uv
    if not rho > 0.0:
        raise NoConvergence("spectral radius is zero", float("inf"))
    v = v / uv
    Mv = Mv / uv
    uM = u @ M
    res_v = np.abs(Mv - rho * v).max() / (rho * np.abs(v).max())
    res_u = np.abs(uM - rho * u).max() / (rho * np.abs(u).max())
    return rho, u, v, float(max(res_v, res_u)), iterations


class FamilyCore:
    """Numerical core of an exponential family generated by ``(P, f)``.

    Every evaluation works on the rescaled tilt
    ``P(x, y) exp(theta (f(y) - s))`` with ``s = max f`` for ``theta > 0``
    and ``s = min f`` for ``theta < 0``, so no entry exceeds one and
    large ``|theta|`` degrades gracefully into the limit matrices.
    """

    def __init__(self, P, f, log_rho_top, log_rho_bottom, tol=1e-12, max_iter=100_000):
        self.P = np.ascontiguousarray(P, dtype=float)
        self.f = np.ascontiguousarray(f, dtype=float)
        self.n = self.P.shape[0]
        self.fmax = float(self.f.max())
        self.fmin = float(self.f.min())
        self.log_rho_top = float(log_rho_top)
        self.log_rho_bottom = float(log_rho_bottom)
        self.tol = tol
        self.max_iter = max_iter
        self.evaluations = 0
        self.theta_cap = THETA_SPAN / (self.fmax - self.fmin)
        self.mu0 = self.evaluate(0.0)[1]

    def _scaled(self, theta):
        if theta > 0.0:
            return self.P * np.exp(theta * (self.f - self.fmax)), theta * self.fmax
        if theta < 0.0:
            return self.P * np.exp(theta * (self.f - self.fmin)), theta * self.fmin
        return self.P, 0.0

    def _solve(self, theta, u0=None, v0=None):
        M, shift = self._scaled(theta)
        self.evaluations += 1
        rho, u, v, res, it = power_iteration(M, self.tol, self.max_iter, u0, v0)
        return math.log(rho) + shift, u, v, res, it

    def triple(self, theta):
        """``(A(theta), u, v, residual, iterations)`` for the scaled tilt."""
        return self._solve(float(theta))

    def evaluate(self, theta):
        """``(A(theta), mu(theta))``."""
        A, u, v, _, _ = self._solve(float(theta))
        return A, float(self.f @ (u * v))

    def _invert(self, mu):
        # returns (theta, A(theta)) with |mu(theta) - mu| <= MEAN_TOL where reachable
        if not self.fmin < mu < self.fmax:
            raise MeanOutOfRange(f"mean {mu!r} outside open interval ({self.fmin}, {self.fmax})")
        if mu == self.mu0:
            return 0.0, 0.0
        warm = [None, None]

        def g(theta):
            A, u, v, _, _ = self._solve(theta, warm[0], warm[1])
            warm[0], warm[1] = u, v
            return A, float(self.f @ (u * v)) - mu

        if mu > self.mu0:
            lo, glo, Alo = 0.0, self.mu0 - mu, 0.0
            hi = 1.0
            Ahi, ghi = g(hi)
            while ghi <= 0.0:
                if ghi == 0.0:
                    return hi, Ahi
                lo, glo, Alo = hi, ghi, Ahi
                hi *= 2.0
                if hi > 2.0 * self.theta_cap:
                    raise NoConvergence(f"mean {mu!r} is numerically at the boundary", abs(ghi))
                Ahi, ghi = g(hi)
        else:
            hi, ghi, Ahi = 0.0, self.mu0 - mu, 0.0
            lo = -1.0
            Alo, glo = g(lo)
            while glo >= 0.0:
                if glo == 0.0:
                    return lo, Alo
                hi, ghi, Ahi = lo, glo, Alo
                lo *= 2.0
                if lo < -2.0 * self.theta_cap:
                    raise NoConvergence(f"mean {mu!r} is numerically at the boundary", abs(glo))
                Alo, glo = g(lo)

        side = 0
        theta, A, gt = lo, Alo, glo
        for _ in range(MAX_INVERSION_STEPS):
            theta = (lo * ghi - hi * glo) / (ghi - glo)
            if not lo < theta < hi:
                theta = 0.5 * (lo + hi)
                if not lo < theta < hi:
                    break
            A, gt = g(theta)
            if abs(gt) <= MEAN_TOL:
                return theta, A
            if gt < 0.0:
                lo, glo = theta, gt
                if side == -1:
                    ghi *= 0.5
                side = -1
            else:
                hi, ghi = theta, gt
                if side == 1:
                    glo *= 0.5
                side = 1
        return theta, A

    def theta_from_mean(self, mu):
        return self._invert(float(mu))[0]

    def dual(self, mu):
        """``(theta, A*(mu), A(theta))``; boundary means map to ``theta = +-inf``."""
        mu = float(mu)
        if mu == self.fmax:
            return math.inf, -self.log_rho_top, math.nan
        if mu == self.fmin:
            return -math.inf, -self.log_rho_bottom, math.nan
        theta, A = self._invert(mu)
        return theta, theta * mu - A, A

    def kl_mean(self, mu1, mu2):
        """Divergence rate between the members with means ``mu1`` and ``mu2``."""
        mu1, mu2 = float(mu1), float(mu2)
        if not self.fmin < mu2 < self.fmax:
            raise MeanOutOfRange(f"second mean {mu2!r} must be interior")
        if not self.fmin <= mu1 <= self.fmax:
            raise MeanOutOfRange(f"mean {mu1!r} outside [{self.fmin}, {self.fmax}]")
        if mu1 == mu2:
            return 0.0
        theta2, _, A2 = self.dual(mu2)
        conj1 = self.dual(mu1)[1]
        return max(conj1 - (theta2 * mu1 - A2), 0.0)


def cumulative_rows(P):
    """Row-wise cumulative sums plus the last positive column of each row."""
    P = np.asarray(P, dtype=float)
    cum = np.cumsum(P, axis=1)
    last = np.array([np.flatnonzero(row > 0)[-1] for row in P], dtype=np.int64)
    return np.ascontiguousarray(cum), last


def next_state(cum_row, last, u):
    j = bisect_right(cum_row, u)
    return j if j <= last else last


def simulate_path(cum, last, x0, uniforms):
    """States ``x_0 .. x_k`` driven by inverse-CDF on the given uniforms."""
    k = len(uniforms)
    out = np.empty(k + 1, dtype=np.int64)
    x = int(x0)
    out[0] = x
    rows = [list(r) for r in cum]
    lasts = [int(v) for v in last]
    for i in range(k):
        x = next_state(rows[x], lasts[x], uniforms[i])
        out[i + 1] = x
    return out
