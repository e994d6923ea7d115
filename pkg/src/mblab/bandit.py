"""Best-Markovian-arm identification with the (alpha, delta)-Track-and-Stop strategy.

Every arm is a Markov chain from one exponential family.  Sampling an arm
advances its chain by one step; unsampled arms stay still.  The strategy
tracks the optimal proportions of the empirical instance (with forced
exploration), stops with the Chernoff rule on pairwise ``Z`` statistics and
recommends the arm with the best sample mean.
"""
from __future__ import annotations

import math
import warnings
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .characteristic import best_arm, binary_kl, optimal_weights
from .errors import InsufficientSamples, NoUniqueBest, SupportMismatch, Timeout
from .family import ExpFamily
from .markov import Trajectory, mean_return_time
from .rng import UniformBuffer, stream

MAX_SAMPLES = 10_000_000
# relative margin of the cheap Z upper bound before an exact evaluation is skipped
SKIP_MARGIN = 1e-9


class BanditInstance:
    """Arms ``P_theta_a`` of one family; the largest mean must be unique."""

    def __init__(self, family: ExpFamily, thetas):
        thetas = [float(t) for t in thetas]
        if len(thetas) < 2:
            raise ValueError("a bandit instance needs at least two arms")
        self.family = family
        self.thetas = np.array(thetas)
        self.means = np.array([family.mean(t) for t in thetas])
        self.best = best_arm(self.means)

    @classmethod
    def from_means(cls, family: ExpFamily, means):
        return cls(family, [family.theta_from_mean(mu) for mu in means])

    @property
    def K(self) -> int:
        return len(self.thetas)

    def kernels(self):
        return [self.family.member(t).kernel for t in self.thetas]

    def __repr__(self):
        return f"BanditInstance(thetas={self.thetas.tolist()!r}, means={self.means.tolist()!r})"


@dataclass(frozen=True)
class StrategyParams:
    """Constants of the stopping threshold ``beta(t) = 2 log(D t^alpha / delta)``."""

    delta: float
    K: int
    C: float
    alpha: float = 1.2

    def __post_init__(self):
        if not self.alpha > 1.0:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.K < 2:
            raise ValueError("K must be at least 2")
        if not self.C >= 1.0:
            raise ValueError("ratio constant C must be at least 1")
        if self.alpha > 2.0:
            warnings.warn(f"alpha = {self.alpha} > 2 inflates the threshold", stacklevel=3)

    @classmethod
    def for_instance(cls, instance: BanditInstance, delta: float, alpha: float = 1.2):
        return cls(delta=delta, K=instance.K, C=instance.family.ratio_constant(), alpha=alpha)

    @property
    def D(self) -> float:
        return 2.0 * self.alpha * self.K * self.C**2 / (self.alpha - 1.0)


@dataclass
class RunState:
    """Mutable bookkeeping of one replication.

    ``counts[a]`` is the number of transitions observed on arm ``a`` (samples
    minus one) and ``sums[a]`` the rewards of those transitions; the very
    first sample of each arm is not part of the mean.
    """

    family: ExpFamily
    t: int = 0
    counts: list = field(default_factory=list)
    sums: list = field(default_factory=list)
    means: list = field(default_factory=list)
    current_state: list = field(default_factory=list)
    trajectories: list = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.counts)


@dataclass
class RunResult:
    tau: int
    decision: int
    correct: bool
    counts: tuple = ()
    seed: int | None = None
    trace: list | None = None


def weighted_mean(na, mean_a, nb, mean_b) -> float:
    return (na * mean_a + nb * mean_b) / (na + nb)


def _crossing(family, mean_a, mean_b, x):
    # dual data at the pooled mean, kept strictly inside (m, M)
    if x >= family.M or x <= family.m:
        x = min(max(x, math.nextafter(family.m, math.inf)), math.nextafter(family.M, -math.inf))
    return family.core.dual(x)


def _z_ordered(family, na, ma, nb, mb, conj_a, conj_b):
    # Z for ma > mb; returns (Z, theta_x, A_x)
    x = weighted_mean(na, ma, nb, mb)
    tx, _, Ax = _crossing(family, ma, mb, x)
    kla = max(conj_a - tx * ma + Ax, 0.0)
    klb = max(conj_b - tx * mb + Ax, 0.0)
    return na * kla + nb * klb, tx, Ax


def z_statistic(state: RunState, a: int, b: int) -> float:
    """Chernoff statistic ``Z_{a,b}(t)``; antisymmetric in ``(a, b)``.

    For ``mean_a >= mean_b`` it is ``N_a KL(mean_a || x) + N_b KL(mean_b || x)``
    with ``x`` the count-weighted pooled mean.

    Raises
    ------
    InsufficientSamples
        If either arm has no observed transition.
    """
    na, nb = state.counts[a], state.counts[b]
    if na < 1 or nb < 1:
        raise InsufficientSamples(f"Z needs a transition on both arms (N = {na}, {nb})")
    ma, mb = state.means[a], state.means[b]
    if ma == mb:
        return 0.0
    fam = state.family
    if ma < mb:
        return -z_statistic(state, b, a)
    return _z_ordered(fam, na, ma, nb, mb, fam.conjugate(ma), fam.conjugate(mb))[0]


def threshold(params: StrategyParams, t: int) -> float:
    """``beta(t) = 2 log(D t^alpha / delta)``; may be negative for tiny ``D t^alpha``."""
    if t < 1:
        raise ValueError("t must be at least 1")
    return 2.0 * (math.log(params.D) + params.alpha * math.log(t) - math.log(params.delta))


def forced_exploration_set(state: RunState, K: int | None = None) -> list:
    """Arms with ``N_a(t) < sqrt(t) - K/2``."""
    K = state.K if K is None else K
    level = math.sqrt(state.t) - K / 2.0
    return [a for a in range(K) if state.counts[a] < level]


def choose_arm(state: RunState, weights) -> int:
    """Forced exploration if needed, otherwise direct tracking of ``weights``."""
    forced = forced_exploration_set(state)
    if forced:
        return min(forced, key=lambda a: (state.counts[a], a))
    t = state.t
    best, gap = 0, -math.inf
    for a in range(state.K):
        g = weights[a] - state.counts[a] / t
        if g > gap:
            best, gap = a, g
    return best


def should_stop(state: RunState, params: StrategyParams):
    """Arm ``a`` with ``Z_{a,b}(t) > max(0, beta(t))`` for every ``b != a``, else ``None``."""
    means = state.means
    top = max(means)
    leaders = [a for a in range(state.K) if means[a] == top]
    if len(leaders) != 1:
        return None
    a = leaders[0]
    level = max(0.0, threshold(params, state.t))
    for b in range(state.K):
        if b != a and not z_statistic(state, a, b) > level:
            return None
    return a


def decide(state: RunState) -> int:
    """Arm with the largest sample mean (lowest index among ties)."""
    means = state.means
    return max(range(len(means)), key=lambda a: (means[a], -a))


def _clamped(family, mu):
    pad = 1e-9 * (family.M - family.m)
    return min(max(mu, family.m + pad), family.M - pad)


def run(
    instance: BanditInstance,
    params: StrategyParams,
    seed: int,
    trace: bool = False,
    max_samples: int = MAX_SAMPLES,
    q=None,
) -> RunResult:
    """One replication of Track-and-Stop; deterministic given ``seed``.

    Each arm draws its uniforms from its own stream ``(seed, "arm", a)``.
    Two samples per arm initialize the means, then the loop chooses an arm,
    advances its chain, updates the statistics and tests the stopping rule.

    Raises
    ------
    Timeout
        If ``max_samples`` samples are drawn without stopping.
    """
    family = instance.family
    K = instance.K
    f = [float(x) for x in family.f]
    q = np.asarray(family.q if q is None else q, dtype=float)
    q_cum = np.cumsum(q).tolist()
    q_last = int(np.flatnonzero(q > 0)[-1])
    cum, last = [], []
    for kernel in instance.kernels():
        c = np.cumsum(kernel, axis=1)
        cum.append([row.tolist() for row in c])
        last.append([int(np.flatnonzero(row > 0)[-1]) for row in kernel])
    buffers = [UniformBuffer(stream(seed, "arm", a)) for a in range(K)]

    state = RunState(family=family)
    for a in range(K):
        x0 = min(bisect_right(q_cum, buffers[a].next()), q_last)
        j = bisect_right(cum[a][x0], buffers[a].next())
        x1 = j if j <= last[a][x0] else last[a][x0]
        state.counts.append(1)
        state.sums.append(f[x1])
        state.means.append(f[x1])
        state.current_state.append(x1)
        state.trajectories.append([x0, x1])
    state.t = 2 * K

    dual = family.core.dual
    counts, sums, means = state.counts, state.sums, state.means
    raw = [dual(mu) for mu in means]  # (theta, A*, A) at the sample means
    conj = [d[1] for d in raw]
    clamp_cache = [None] * K  # (clamped mean, theta, A*)
    pair_hint = {}  # (a, b) -> (theta, A) of the last exact crossing
    log_terms = math.log(params.D) - math.log(params.delta)
    alpha = params.alpha
    records = [] if trace else None

    def clamped_dual(a):
        mu = _clamped(family, means[a])
        if mu == means[a]:
            return mu, raw[a][0], raw[a][1]
        hit = clamp_cache[a]
        if hit is None or hit[0] != mu:
            theta, c, _ = dual(mu)
            hit = clamp_cache[a] = (mu, theta, c)
        return hit

    def weights():
        cm = [clamped_dual(a) for a in range(K)]
        vals = [c[0] for c in cm]
        top = max(vals)
        if sum(1 for v in vals if v == top) > 1:
            return [1.0 / K] * K
        return optimal_weights(family, vals, [(c[1], c[2]) for c in cm])[0]

    def stop_check(t):
        top = max(means)
        leaders = [a for a in range(K) if means[a] == top]
        beta = 2.0 * (log_terms + alpha * math.log(t))
        level = max(0.0, beta)
        zs = [] if trace else None
        if len(leaders) != 1:
            return None, zs, beta
        a = leaders[0]
        ma, na = means[a], counts[a]
        winner = a
        for b in range(K):
            if b == a:
                continue
            mb, nb = means[b], counts[b]
            hint = pair_hint.get((a, b))
            if hint is not None and not trace:
                th, Ah = hint
                bound = na * (conj[a] - th * ma + Ah) + nb * (conj[b] - th * mb + Ah)
                if bound < level - SKIP_MARGIN * max(1.0, level):
                    return None, zs, beta
            z, th, Ah = _z_ordered(family, na, ma, nb, mb, conj[a], conj[b])
            pair_hint[(a, b)] = (th, Ah)
            if trace:
                zs.append((b, z))
            if not z > level:
                winner = None
                if not trace:
                    return None, zs, beta
        return winner, zs, beta

    winner, zs, beta = stop_check(state.t)
    if trace:
        records.append((state.t, None, zs, beta))
    while winner is None:
        if state.t >= max_samples:
            raise Timeout(state.t, seed)
        forced = forced_exploration_set(state, K)
        if forced:
            arm = min(forced, key=lambda a: (counts[a], a))
        else:
            w = weights()
            t = state.t
            arm, gap = 0, -math.inf
            for a in range(K):
                g = w[a] - counts[a] / t
                if g > gap:
                    arm, gap = a, g
        x = state.current_state[arm]
        j = bisect_right(cum[arm][x], buffers[arm].next())
        y = j if j <= last[arm][x] else last[arm][x]
        state.current_state[arm] = y
        state.trajectories[arm].append(y)
        counts[arm] += 1
        sums[arm] += f[y]
        means[arm] = sums[arm] / counts[arm]
        raw[arm] = dual(means[arm])
        conj[arm] = raw[arm][1]
        state.t += 1
        winner, zs, beta = stop_check(state.t)
        if trace:
            records.append((state.t, arm, zs, beta))

    decision = decide(state)
    return RunResult(
        tau=state.t,
        decision=decision,
        correct=decision == instance.best,
        counts=tuple(counts),
        seed=seed,
        trace=records,
    )


def nonasymptotic_lower_bound(instance: BanditInstance, params: StrategyParams, q=None) -> float:
    """``max(0, kl(delta, 1 - delta) T* - sum_a R_a)``.

    ``R_a`` is the mean return time of arm ``a`` started from its initial
    distribution (``q`` per arm, default the family's).
    """
    family = instance.family
    _, T = optimal_weights(family, instance.means)
    qs = [family.q] * instance.K if q is None else list(q)
    R = sum(mean_return_time(K_a, q_a) for K_a, q_a in zip(instance.kernels(), qs))
    return max(0.0, binary_kl(params.delta, 1.0 - params.delta) * T - R)


def log_likelihood_ratio(family: ExpFamily, trajectories, thetas, lambdas, q_theta=None, q_lambda=None) -> float:
    """Log-likelihood ratio of observed per-arm trajectories under two parametrizations.

    Raises
    ------
    SupportMismatch
        If an observed transition is impossible under either kernel.
    """
    q_theta = np.asarray(family.q if q_theta is None else q_theta, dtype=float)
    q_lambda = np.asarray(family.q if q_lambda is None else q_lambda, dtype=float)
    total = 0.0
    n = family.n
    for traj, th, la in zip(trajectories, thetas, lambdas):
        states = traj.states if isinstance(traj, Trajectory) else np.asarray(traj, dtype=np.int64)
        if len(states) == 0:
            continue
        x0 = states[0]
        if q_theta[x0] <= 0 or q_lambda[x0] <= 0:
            raise SupportMismatch(f"initial state {x0} has zero probability")
        total += math.log(q_theta[x0] / q_lambda[x0])
        if float(th) == float(la) or len(states) < 2:
            continue
        P1 = family.member(th).kernel
        P2 = family.member(la).kernel
        counts = Trajectory(states).pair_counts(n)
        seen = counts > 0
        if np.any(P1[seen] <= 0) or np.any(P2[seen] <= 0):
            raise SupportMismatch("observed transition has zero probability under one kernel")
        total += float(np.sum(counts[seen] * np.log(P1[seen] / P2[seen])))
    return total


def empirical_error_rate(results) -> float:
    results = list(results)
    return sum(not r.correct for r in results) / len(results) if results else 0.0
