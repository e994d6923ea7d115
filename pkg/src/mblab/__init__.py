"""Exponential families of Markov chains, Markov Chernoff bounds and
Track-and-Stop identification of the best Markovian arm."""
from ._backend import BACKEND
from .bandit import (
    BanditInstance,
    RunResult,
    RunState,
    StrategyParams,
    nonasymptotic_lower_bound,
    run,
)
from .characteristic import jensen_shannon, optimal_weights
from .config import ExperimentConfig, load_config
from .family import ExpFamily, FamilyMember, LimitMember
from .markov import (
    RewardFunction,
    StochasticMatrix,
    perron_frobenius,
    stationary_distribution,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BanditInstance",
    "ExpFamily",
    "ExperimentConfig",
    "FamilyMember",
    "LimitMember",
    "RewardFunction",
    "RunResult",
    "RunState",
    "StochasticMatrix",
    "StrategyParams",
    "jensen_shannon",
    "load_config",
    "nonasymptotic_lower_bound",
    "optimal_weights",
    "perron_frobenius",
    "run",
    "stationary_distribution",
]
