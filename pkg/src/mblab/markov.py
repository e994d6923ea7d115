"""Finite-state Markov chain fundamentals.

Validation of transition matrices, irreducibility, stationary distributions,
Perron-Frobenius triples of nonnegative matrices, simulation and trajectory
statistics.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._backend import kernels
from .errors import (
    NegativeEntry,
    NotIrreducible,
    RowSumViolation,
    StructureUnsupported,
)

ROW_SUM_TOL = 1e-12


class StochasticMatrix:
    """Validated row-stochastic transition matrix (immutable).

    Parameters
    ----------
    entries : array_like, shape (n, n)
        Transition probabilities, ``n >= 2``.

    Raises
    ------
    NegativeEntry
        If any entry is negative.
    RowSumViolation
        If a row sum deviates from one by more than ``1e-12``.
    """

    __slots__ = ("_P",)

    def __init__(self, entries):
        P = np.array(entries, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError(f"transition matrix must be square, got shape {P.shape}")
        if P.shape[0] < 2:
            raise ValueError("transition matrix needs at least two states")
        if not np.all(np.isfinite(P)):
            raise ValueError("transition matrix has non-finite entries")
        neg = np.argwhere(P < 0)
        if len(neg):
            r, c = neg[0]
            raise NegativeEntry(int(r), int(c), float(P[r, c]))
        dev = P.sum(axis=1) - 1.0
        bad = np.flatnonzero(np.abs(dev) > ROW_SUM_TOL)
        if len(bad):
            raise RowSumViolation(int(bad[0]), float(dev[bad[0]]))
        P.setflags(write=False)
        self._P = P

    @property
    def entries(self) -> np.ndarray:
        return self._P

    @property
    def n(self) -> int:
        return self._P.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self._P if dtype is None else self._P.astype(dtype)

    def __getitem__(self, idx):
        return self._P[idx]

    def __eq__(self, other):
        if isinstance(other, StochasticMatrix):
            return np.array_equal(self._P, other._P)
        return NotImplemented

    def __hash__(self):
        return hash(self._P.tobytes())

    def __repr__(self):
        return f"StochasticMatrix({self._P.tolist()!r})"


def new_stochastic_matrix(entries) -> StochasticMatrix:
    return StochasticMatrix(entries)


class RewardFunction:
    """Per-state rewards with their extreme values and argmax/argmin sets."""

    __slots__ = ("values", "M", "m", "S_M", "S_m")

    def __init__(self, values):
        f = np.array(values, dtype=float)
        if f.ndim != 1 or len(f) < 2:
            raise ValueError("rewards must be a vector over at least two states")
        if not np.all(np.isfinite(f)):
            raise ValueError("rewards must be finite")
        M, m = float(f.max()), float(f.min())
        if not M > m:
            raise ValueError("reward function must be nonconstant")
        f.setflags(write=False)
        self.values = f
        self.M, self.m = M, m
        self.S_M = tuple(int(i) for i in np.flatnonzero(f == M))
        self.S_m = tuple(int(i) for i in np.flatnonzero(f == m))

    def __len__(self):
        return len(self.values)

    def __neg__(self):
        return RewardFunction(-self.values)

    def __repr__(self):
        return f"RewardFunction({self.values.tolist()!r})"


@dataclass(frozen=True)
class Trajectory:
    """Visited states ``x_0, ..., x_t``."""

    states: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.states, dtype=np.int64)
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    def __len__(self):
        return len(self.states)

    @property
    def steps(self) -> int:
        return len(self.states) - 1

    def pair_counts(self, n: int) -> np.ndarray:
        """``N(x, y, 0, t)``: number of observed transitions ``x -> y``."""
        counts = np.zeros((n, n), dtype=np.int64)
        if len(self.states) > 1:
            np.add.at(counts, (self.states[:-1], self.states[1:]), 1)
        return counts

    def is_supported_by(self, P) -> bool:
        P = np.asarray(P)
        s = self.states
        return bool(np.all(P[s[:-1], s[1:]] > 0)) if len(s) > 1 else True


@dataclass(frozen=True)
class PerronFrobeniusTriple:
    rho: float
    u: np.ndarray
    v: np.ndarray
    residual: float = 0.0
    iterations: int = 0


@dataclass(frozen=True)
class GeneratorReport:
    """The four structural conditions a family generator must satisfy."""

    top_block_irreducible: bool
    reaches_top: bool
    bottom_block_irreducible: bool
    reaches_bottom: bool
    details: dict = field(default_factory=dict, compare=False)

    @property
    def passed(self) -> bool:
        return (
            self.top_block_irreducible
            and self.reaches_top
            and self.bottom_block_irreducible
            and self.reaches_bottom
        )


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        x = queue.popleft()
        for y in np.flatnonzero(adj[x]):
            if not seen[y]:
                seen[y] = True
                queue.append(y)
    return seen


def _strongly_connected(M) -> bool:
    # a 1x1 block counts as irreducible only with a self-loop
    adj = np.asarray(M) > 0
    if adj.shape[0] == 1:
        return bool(adj[0, 0])
    return bool(_reachable(adj, 0).all() and _reachable(adj.T, 0).all())


def is_irreducible(P) -> bool:
    """True iff the support graph ``{(x, y): P(x, y) > 0}`` is strongly connected."""
    return _strongly_connected(np.asarray(P, dtype=float))


def _require_irreducible(P):
    if not is_irreducible(P):
        raise NotIrreducible("transition matrix is not irreducible")


def check_generator(P, f) -> GeneratorReport:
    """Check the structural conditions tying a generator ``P`` to rewards ``f``.

    A one-state block ``S_M`` (or ``S_m``) is treated as irreducible only if
    that state has a positive self-transition.
    """
    P = np.asarray(P, dtype=float)
    f = f if isinstance(f, RewardFunction) else RewardFunction(f)
    _require_irreducible(P)
    flags = []
    details = {}
    for name, block in (("top", f.S_M), ("bottom", f.S_m)):
        idx = np.array(block)
        rest = np.setdiff1d(np.arange(P.shape[0]), idx)
        irreducible = _strongly_connected(P[np.ix_(idx, idx)])
        missing = [int(x) for x in rest if not np.any(P[x, idx] > 0)]
        flags += [irreducible, not missing]
        details[name] = {"block": block, "states_without_edge": missing}
    return GeneratorReport(*flags, details=details)


def stationary_distribution(P) -> np.ndarray:
    """Stationary distribution by a direct linear solve.

    One equation of ``(P^T - I) pi = 0`` is replaced by ``sum(pi) = 1``.
    """
    P = np.asarray(P, dtype=float)
    _require_irreducible(P)
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _single_top_block(M: np.ndarray):
    # block of nonzero columns if M = [[A, 0], [B, 0]] with A irreducible, B rows nonzero
    cols = np.flatnonzero(M.any(axis=0))
    if len(cols) == 0:
        return None
    if not _strongly_connected(M[np.ix_(cols, cols)]):
        return None
    rest = np.setdiff1d(np.arange(M.shape[0]), cols)
    if len(rest) and not np.all(M[np.ix_(rest, cols)].any(axis=1)):
        return None
    return cols


def perron_frobenius(M, tol: float = 1e-12, max_iter: int = 100_000) -> PerronFrobeniusTriple:
    """Perron-Frobenius eigenvalue and eigenvectors of a nonnegative matrix.

    ``M`` must be irreducible, or have the block shape ``[[A, 0], [B, 0]]``
    (up to a permutation) with ``A`` irreducible and no zero row in ``B``.
    The left vector ``u`` sums to one and ``u @ v == 1``.

    Uses joint power iteration on ``M + cI`` (``c`` = largest row sum), which
    handles periodic matrices.

    Raises
    ------
    StructureUnsupported
        If ``M`` has neither admissible shape.
    NoConvergence
        If the iteration budget is exhausted.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if np.any(M < 0):
        raise ValueError("matrix must be nonnegative")
    block = None
    if not _strongly_connected(M):
        block = _single_top_block(M)
        if block is None:
            raise StructureUnsupported(
                "matrix is neither irreducible nor of the irreducible-block-plus-feeder shape"
            )
    rho, u, v, residual, iterations = kernels.power_iteration(M, tol, max_iter)
    if block is not None:
        # the left vector vanishes off the block; drop the geometric residue
        outside = np.ones(M.shape[0], dtype=bool)
        outside[block] = False
        u[outside] = 0.0
        u /= u.sum()
        v /= u @ v
    return PerronFrobeniusTriple(float(rho), u, v, float(residual), int(iterations))


def _as_distribution(q, n) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (n,) or np.any(q < 0) or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("initial distribution must be a probability vector over the states")
    return q


def simulate(P, q, steps: int, rng: np.random.Generator) -> Trajectory:
    """Simulate ``steps`` transitions from ``x_0 ~ q``; deterministic given ``rng``."""
    P = np.asarray(P, dtype=float)
    q = _as_distribution(q, P.shape[0])
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    x0 = int(rng.choice(P.shape[0], p=q))
    cum, last = kernels.cumulative_rows(P)
    return Trajectory(kernels.simulate_path(cum, last, x0, rng.random(steps)))


def simulate_many(P, q, steps: int, reps: int, rng: np.random.Generator) -> np.ndarray:
    """``reps`` independent trajectories as a ``(reps, steps + 1)`` state array."""
    P = np.asarray(P, dtype=float)
    q = _as_distribution(q, P.shape[0])
    cum, last = kernels.cumulative_rows(P)
    out = np.empty((reps, steps + 1), dtype=np.int64)
    out[:, 0] = np.minimum(np.searchsorted(np.cumsum(q), rng.random(reps), side="right"),
                           np.flatnonzero(q > 0)[-1])
    for k in range(steps):
        u = rng.random(reps)
        x = out[:, k]
        j = (cum[x] <= u[:, None]).sum(axis=1)
        out[:, k + 1] = np.minimum(j, last[x])
    return out


def mean_return_time(P, q) -> float:
    """Expected first return time to the initial state, ``sum_x q(x) / pi(x)``."""
    P = np.asarray(P, dtype=float)
    q = _as_distribution(q, P.shape[0])
    pi = stationary_distribution(P)
    return float(np.sum(q / pi))


def first_return_times(P, q, reps: int, rng: np.random.Generator, max_steps: int = 10**6) -> np.ndarray:
    """Monte-Carlo draws of ``inf{n > 0 : X_n = X_0}``."""
    P = np.asarray(P, dtype=float)
    q = _as_distribution(q, P.shape[0])
    cum, last = kernels.cumulative_rows(P)
    x0 = np.searchsorted(np.cumsum(q), rng.random(reps), side="right")
    x0 = np.minimum(x0, np.flatnonzero(q > 0)[-1])
    x = x0.copy()
    times = np.zeros(reps, dtype=np.int64)
    active = np.ones(reps, dtype=bool)
    for step in range(1, max_steps + 1):
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            break
        u = rng.random(len(idx))
        xs = x[idx]
        nxt = np.minimum((cum[xs] <= u[:, None]).sum(axis=1), last[xs])
        x[idx] = nxt
        back = nxt == x0[idx]
        times[idx[back]] = step
        active[idx[back]] = False
    return times


def transition_frequencies(traj: Trajectory, n: int) -> np.ndarray:
    """Empirical transition matrix; rows of unvisited states are zero."""
    counts = traj.pair_counts(n).astype(float)
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)


def as_matrix(P: StochasticMatrix | Sequence | np.ndarray) -> np.ndarray:
    return np.asarray(P, dtype=float)
