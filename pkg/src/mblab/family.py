"""One-parameter exponential family of Markov chains generated by ``(P, f)``.

Each member tilts the transitions of ``P`` by ``exp(theta * f(y))`` and
renormalizes with the right Perron-Frobenius eigenvector, giving a stochastic
kernel ``P_theta`` whose stationary reward is the mean ``mu(theta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import MeanOutOfRange, StructureUnsupported
from .markov import (
    RewardFunction,
    StochasticMatrix,
    check_generator,
    perron_frobenius,
)

# theta grid for the eigenvector-ratio constant of non-positive generators
RATIO_GRID = np.concatenate(([0.0], np.geomspace(0.25, 64.0, 33)))
RATIO_SAFETY = 1.05
MEMBER_CACHE_SIZE = 4096


@dataclass(frozen=True)
class FamilyMember:
    theta: float
    rho: float
    log_pf: float
    left: np.ndarray
    right: np.ndarray
    kernel: np.ndarray
    stationary: np.ndarray
    mean: float


@dataclass(frozen=True)
class LimitMember:
    sign: int
    rho_bar: float
    kernel: np.ndarray
    left: np.ndarray
    right: np.ndarray


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _stochastic_from(M, v, rho):
    K = M * v[None, :] / (rho * v[:, None])
    # PF normalization leaves ~1e-15 row-sum error; renormalize exactly
    return K / K.sum(axis=1, keepdims=True)


class ExpFamily:
    """Exponential family generated by a stochastic matrix and a reward vector.

    Parameters
    ----------
    generator : array_like or StochasticMatrix
        Irreducible generator ``P``.
    rewards : array_like or RewardFunction
        Nonconstant rewards ``f``.
    q : array_like, optional
        Initial distribution shared by all members; uniform by default.
    tol : float
        Power-iteration tolerance.

    Raises
    ------
    StructureUnsupported
        If ``(P, f)`` fails one of the four generator conditions.
    """

    def __init__(self, generator, rewards, q=None, tol: float = 1e-12, max_iter: int = 100_000):
        P = generator if isinstance(generator, StochasticMatrix) else StochasticMatrix(generator)
        f = rewards if isinstance(rewards, RewardFunction) else RewardFunction(rewards)
        if len(f) != P.n:
            raise ValueError(f"rewards have length {len(f)}, generator has {P.n} states")
        report = check_generator(P.entries, f)
        if not report.passed:
            raise StructureUnsupported(f"generator conditions fail: {report}")
        self.generator = P
        self.rewards = f
        self.report = report
        n = P.n
        q = np.full(n, 1.0 / n) if q is None else np.array(q, dtype=float)
        if q.shape != (n,) or np.any(q <= 0) or abs(q.sum() - 1.0) > 1e-9:
            raise ValueError("initial distribution must be strictly positive and sum to one")
        self.q = _frozen(q)
        self.tol = tol
        self._limits = {s: self._build_limit(s) for s in (1, -1)}
        self.core = kernels.FamilyCore(
            P.entries,
            f.values,
            math.log(self._limits[1].rho_bar),
            math.log(self._limits[-1].rho_bar),
            tol,
            max_iter,
        )
        self._members = {}
        self._C = None

    # basic attributes
    @property
    def P(self) -> np.ndarray:
        return self.generator.entries

    @property
    def f(self) -> np.ndarray:
        return self.rewards.values

    @property
    def n(self) -> int:
        return self.generator.n

    @property
    def M(self) -> float:
        return self.rewards.M

    @property
    def m(self) -> float:
        return self.rewards.m

    @property
    def mu0(self) -> float:
        return self.core.mu0

    def __repr__(self):
        return f"ExpFamily(P={self.P.tolist()!r}, f={self.f.tolist()!r})"

    def _build_limit(self, sign) -> LimitMember:
        block = self.rewards.S_M if sign > 0 else self.rewards.S_m
        Pbar = np.zeros_like(self.P)
        Pbar[:, block] = self.P[:, block]
        pf = perron_frobenius(Pbar, self.tol)
        kernel = _stochastic_from(Pbar, pf.v, pf.rho)
        return LimitMember(sign, pf.rho, _frozen(kernel), _frozen(pf.u), _frozen(pf.v))

    def tilted(self, theta: float, log: bool = False) -> np.ndarray:
        """``P(x, y) exp(theta f(y))``; with ``log=True`` its entrywise logarithm.

        The log form stays finite for any ``theta``; zero entries map to -inf.
        """
        theta = float(theta)
        with np.errstate(divide="ignore"):
            L = np.log(self.P) + theta * self.f[None, :]
        if log:
            return L
        if theta == 0.0:
            return self.P.copy()
        with np.errstate(over="ignore"):
            return np.exp(L)

    def member(self, theta: float) -> FamilyMember:
        """Stochastic member ``P_theta`` with its eigen-data; cached by bit pattern."""
        theta = float(theta)
        key = theta.hex()
        hit = self._members.get(key)
        if hit is not None:
            return hit
        if math.isinf(theta) or math.isnan(theta):
            raise ValueError("member needs a finite theta; use limit_member for the limits")
        A, u, v, _, _ = self.core.triple(theta)
        ref = self.M if theta > 0 else (self.m if theta < 0 else 0.0)
        scaled = self.P * np.exp(theta * (self.f - ref))
        kernel = _stochastic_from(scaled, v, math.exp(A - theta * ref))
        pi = u * v
        try:
            rho = math.exp(A)
        except OverflowError:
            rho = math.inf
        out = FamilyMember(
            theta=theta,
            rho=rho,
            log_pf=float(A),
            left=_frozen(u),
            right=_frozen(v),
            kernel=_frozen(kernel),
            stationary=_frozen(pi),
            mean=float(self.f @ pi),
        )
        if len(self._members) >= MEMBER_CACHE_SIZE:
            self._members.clear()
        self._members[key] = out
        return out

    def log_pf(self, theta: float) -> float:
        return self.core.evaluate(float(theta))[0]

    def mean(self, theta: float) -> float:
        return self.core.evaluate(float(theta))[1]

    def theta_from_mean(self, mu: float) -> float:
        """Inverse of the mean map on the open interval ``(m, M)``."""
        return self.core.theta_from_mean(float(mu))

    def kl_rate_def(self, theta1: float, theta2: float) -> float:
        """Divergence rate from its definition ``sum pi P log(P / P')``."""
        if float(theta1) == float(theta2):
            return 0.0
        a, b = self.member(theta1), self.member(theta2)
        mask = a.kernel > 0
        terms = a.stationary[:, None] * a.kernel * np.log(
            np.where(mask, a.kernel, 1.0) / np.where(mask, b.kernel, 1.0)
        )
        return max(float(terms[mask].sum()), 0.0)

    def kl_rate_theta(self, theta1: float, theta2: float) -> float:
        """Divergence rate through ``A``; ``theta1`` may be +-inf."""
        theta1, theta2 = float(theta1), float(theta2)
        if not math.isfinite(theta2):
            raise ValueError("second parameter must be finite")
        if theta1 == theta2:
            return 0.0
        A2 = self.core.evaluate(theta2)[0]
        if theta1 == math.inf:
            return -math.log(self._limits[1].rho_bar) - (theta2 * self.M - A2)
        if theta1 == -math.inf:
            return -math.log(self._limits[-1].rho_bar) - (theta2 * self.m - A2)
        A1, mu1 = self.core.evaluate(theta1)
        return max(theta1 * mu1 - A1 - (theta2 * mu1 - A2), 0.0)

    def kl_rate_mean(self, mu1: float, mu2: float) -> float:
        """Divergence rate between the members with means ``mu1`` in ``[m, M]`` and ``mu2`` in ``(m, M)``."""
        return self.core.kl_mean(float(mu1), float(mu2))

    def conjugate(self, mu: float) -> float:
        """Convex conjugate ``A*(mu) = sup_theta (theta mu - A(theta))`` on ``[m, M]``."""
        mu = float(mu)
        if not self.m <= mu <= self.M:
            raise MeanOutOfRange(f"mean {mu!r} outside [{self.m}, {self.M}]")
        return self.core.dual(mu)[1]

    def limit_member(self, sign) -> LimitMember:
        s = 1 if (sign == math.inf or (not isinstance(sign, str) and sign > 0) or sign == "+") else -1
        return self._limits[s]

    def regenerate(self, theta: float) -> "ExpFamily":
        """The same family generated from the member ``P_theta`` instead of ``P``."""
        return ExpFamily(self.member(theta).kernel, self.rewards, self.q, self.tol)

    @property
    def ratio_constant_is_approximate(self) -> bool:
        return not bool(np.all(self.P > 0))

    def ratio_constant(self) -> float:
        """Uniform bound ``C`` on right-eigenvector ratios ``v_theta(y) / v_theta(x)``.

        Exact ``max P(y, z) / P(x, z)`` for a positive generator.  Otherwise the
        largest ratio over a logarithmic theta grid (both signs) and the two
        limit eigenvectors, inflated by 1.05; see
        :attr:`ratio_constant_is_approximate`.
        """
        if self._C is not None:
            return self._C
        P = self.P
        if not self.ratio_constant_is_approximate:
            C = float((P.max(axis=0) / P.min(axis=0)).max())
        else:
            best = 1.0
            for theta in np.concatenate((RATIO_GRID, -RATIO_GRID[1:])):
                v = self.member(theta).right
                best = max(best, float(v.max() / v.min()))
            for lim in self._limits.values():
                best = max(best, float(lim.right.max() / lim.right.min()))
            C = RATIO_SAFETY * best
        self._C = max(C, 1.0)
        return self._C


# functional forms of the family operations


def tilted(family: ExpFamily, theta, log=False):
    return family.tilted(theta, log)


def member(family: ExpFamily, theta) -> FamilyMember:
    return family.member(theta)


def mean(family: ExpFamily, theta) -> float:
    return family.mean(theta)


def theta_from_mean(family: ExpFamily, mu) -> float:
    return family.theta_from_mean(mu)


def kl_rate_def(family: ExpFamily, theta1, theta2) -> float:
    return family.kl_rate_def(theta1, theta2)


def kl_rate_theta(family: ExpFamily, theta1, theta2) -> float:
    return family.kl_rate_theta(theta1, theta2)


def kl_rate_mean(family: ExpFamily, mu1, mu2) -> float:
    return family.kl_rate_mean(mu1, mu2)


def conjugate(family: ExpFamily, mu) -> float:
    return family.conjugate(mu)


def limit_member(family: ExpFamily, sign) -> LimitMember:
    return family.limit_member(sign)


def ratio_constant(family: ExpFamily) -> float:
    return family.ratio_constant()
