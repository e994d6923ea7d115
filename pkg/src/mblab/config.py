"""Experiment configuration: YAML ingestion and validation.

Schema (all modes)::

    mode: run                  # family | concentration | lower-bound | run
    seed: 12345                # master seed, integer >= 0
    generator: [[0.9, 0.1], [0.2, 0.8]]
    rewards: [0, 1]
    initial: [0.5, 0.5]        # optional; uniform by default

Arms (``lower-bound`` and ``run``; exactly one of the two lists)::

    arms:
      means: [0.6, 0.35]       # or  thetas: [...]

Strategy (``lower-bound`` and ``run``)::

    strategy:
      delta: 0.1               # or  deltas: [0.1, 0.01] for lower-bound
      alpha: 1.2
    replications: 300
    max_samples: 10000000

Mode knobs::

    family:
      thetas: [-2, -1, 0, 1, 2]
    concentration:
      theta: 0
      n: [1, 14]               # inclusive range
      mu: lattice              # or a list of levels
      tail: upper              # upper | lower
      mc_reps: 0               # 0 disables the Monte-Carlo column
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ParseError, ValidationError
from .markov import ROW_SUM_TOL, RewardFunction, check_generator, is_irreducible

MODES = ("family", "concentration", "lower-bound", "run")
TOP_KEYS = {
    "mode", "seed", "generator", "rewards", "initial", "arms", "strategy",
    "replications", "max_samples", "family", "concentration",
}


@dataclass
class ExperimentConfig:
    mode: str
    seed: int
    generator: list
    rewards: list
    initial: list | None = None
    thetas: list | None = None
    means: list | None = None
    deltas: list = field(default_factory=lambda: [0.1])
    alpha: float = 1.2
    replications: int = 1
    max_samples: int = 10_000_000
    family_thetas: list = field(default_factory=lambda: [-2.0, -1.0, 0.0, 1.0, 2.0])
    conc_theta: float = 0.0
    conc_n: tuple = (1, 14)
    conc_mu: object = "lattice"
    conc_tail: str = "upper"
    conc_mc_reps: int = 0

    @property
    def delta(self) -> float:
        return self.deltas[0]

    def to_dict(self) -> dict:
        """Plain mapping in the documented schema; ``load_config`` accepts it back."""
        d = {
            "mode": self.mode,
            "seed": self.seed,
            "generator": [list(r) for r in self.generator],
            "rewards": list(self.rewards),
        }
        if self.initial is not None:
            d["initial"] = list(self.initial)
        if self.thetas is not None:
            d["arms"] = {"thetas": list(self.thetas)}
        elif self.means is not None:
            d["arms"] = {"means": list(self.means)}
        strat = {"alpha": self.alpha}
        if len(self.deltas) == 1:
            strat["delta"] = self.deltas[0]
        else:
            strat["deltas"] = list(self.deltas)
        d["strategy"] = strat
        d["replications"] = self.replications
        d["max_samples"] = self.max_samples
        d["family"] = {"thetas": list(self.family_thetas)}
        d["concentration"] = {
            "theta": self.conc_theta,
            "n": list(self.conc_n),
            "mu": self.conc_mu if isinstance(self.conc_mu, str) else list(self.conc_mu),
            "tail": self.conc_tail,
            "mc_reps": self.conc_mc_reps,
        }
        return d

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)


def _number(value, name, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(name, f"expected a number, got {value!r}")
    if integer and not (isinstance(value, int) or float(value).is_integer()):
        raise ValidationError(name, f"expected an integer, got {value!r}")
    if not math.isfinite(float(value)):
        raise ValidationError(name, "must be finite")
    return int(value) if integer else float(value)


def _vector(value, name, length=None):
    if not isinstance(value, (list, tuple)) or not value:
        raise ValidationError(name, "expected a non-empty list")
    out = [_number(v, f"{name}[{i}]") for i, v in enumerate(value)]
    if length is not None and len(out) != length:
        raise ValidationError(name, f"expected {length} entries, got {len(out)}")
    return out


def _mapping(value, name, allowed):
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ValidationError(name, "expected a mapping")
    unknown = set(value) - set(allowed)
    if unknown:
        raise ValidationError(f"{name}.{sorted(unknown)[0]}", "unknown key")
    return value


def _generator(value):
    if not isinstance(value, (list, tuple)) or len(value) < 2:
        raise ValidationError("generator", "expected a square matrix with at least two rows")
    n = len(value)
    rows = []
    for i, row in enumerate(value):
        r = _vector(row, f"generator.row[{i}]", n)
        for j, x in enumerate(r):
            if x < 0:
                raise ValidationError(f"generator.row[{i}][{j}]", f"negative probability {x!r}")
        dev = math.fsum(r) - 1.0
        if abs(dev) > ROW_SUM_TOL:
            raise ValidationError(f"generator.row[{i}]", f"sums to {math.fsum(r)!r}, must sum to 1")
        rows.append(r)
    if not is_irreducible(rows):
        raise ValidationError("generator", "not irreducible")
    return rows


def validate(raw) -> ExperimentConfig:
    """Build a validated :class:`ExperimentConfig` from a parsed mapping."""
    if not isinstance(raw, dict):
        raise ValidationError("<root>", "config must be a mapping")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ValidationError(sorted(unknown)[0], "unknown key")
    mode = raw.get("mode")
    if mode not in MODES:
        raise ValidationError("mode", f"must be one of {', '.join(MODES)}")
    seed = _number(raw.get("seed", 0), "seed", integer=True)
    if seed < 0:
        raise ValidationError("seed", "must be >= 0")
    if "generator" not in raw:
        raise ValidationError("generator", "required")
    P = _generator(raw["generator"])
    n = len(P)
    if "rewards" not in raw:
        raise ValidationError("rewards", "required")
    f = _vector(raw["rewards"], "rewards", n)
    try:
        rf = RewardFunction(f)
    except ValueError as exc:
        raise ValidationError("rewards", str(exc)) from None
    report = check_generator(np.array(P), rf)
    if not report.passed:
        raise ValidationError("generator", f"fails the family conditions with these rewards: {report}")
    cfg = ExperimentConfig(mode=mode, seed=seed, generator=P, rewards=f)

    if raw.get("initial") is not None:
        q = _vector(raw["initial"], "initial", n)
        if any(x <= 0 for x in q) or abs(math.fsum(q) - 1.0) > 1e-9:
            raise ValidationError("initial", "must be strictly positive and sum to 1")
        cfg.initial = q

    arms = _mapping(raw.get("arms"), "arms", ("thetas", "means"))
    if "thetas" in arms and "means" in arms:
        raise ValidationError("arms", "give exactly one of thetas, means")
    if "thetas" in arms:
        cfg.thetas = _vector(arms["thetas"], "arms.thetas")
    elif "means" in arms:
        cfg.means = _vector(arms["means"], "arms.means")
        for i, mu in enumerate(cfg.means):
            if not rf.m < mu < rf.M:
                raise ValidationError(f"arms.means[{i}]", f"must lie in ({rf.m}, {rf.M})")
    arm_list = cfg.thetas if cfg.thetas is not None else cfg.means
    if mode in ("lower-bound", "run"):
        if arm_list is None:
            raise ValidationError("arms", f"mode {mode} needs thetas or means")
        if len(arm_list) < 2:
            raise ValidationError("arms", "need at least two arms")
        if cfg.means is not None and sum(1 for x in cfg.means if x == max(cfg.means)) > 1:
            raise ValidationError("arms.means", "largest mean must be unique")

    strat = _mapping(raw.get("strategy"), "strategy", ("delta", "deltas", "alpha"))
    if "delta" in strat and "deltas" in strat:
        raise ValidationError("strategy", "give exactly one of delta, deltas")
    if "deltas" in strat:
        cfg.deltas = _vector(strat["deltas"], "strategy.deltas")
    elif "delta" in strat:
        cfg.deltas = [_number(strat["delta"], "strategy.delta")]
    for i, d in enumerate(cfg.deltas):
        if not 0.0 < d < 1.0:
            raise ValidationError("strategy.delta" if len(cfg.deltas) == 1 else f"strategy.deltas[{i}]",
                                  "must lie in (0, 1)")
    if mode == "run" and len(cfg.deltas) != 1:
        raise ValidationError("strategy.deltas", "run mode takes a single delta")
    if "alpha" in strat:
        cfg.alpha = _number(strat["alpha"], "strategy.alpha")
        if not cfg.alpha > 1.0:
            raise ValidationError("strategy.alpha", "must exceed 1")

    if "replications" in raw:
        cfg.replications = _number(raw["replications"], "replications", integer=True)
        if cfg.replications < 1:
            raise ValidationError("replications", "must be >= 1")
    if "max_samples" in raw:
        cfg.max_samples = _number(raw["max_samples"], "max_samples", integer=True)
        if cfg.max_samples < 1:
            raise ValidationError("max_samples", "must be >= 1")

    fam = _mapping(raw.get("family"), "family", ("thetas",))
    if "thetas" in fam:
        cfg.family_thetas = _vector(fam["thetas"], "family.thetas")

    conc = _mapping(raw.get("concentration"), "concentration", ("theta", "n", "mu", "tail", "mc_reps"))
    if "theta" in conc:
        cfg.conc_theta = _number(conc["theta"], "concentration.theta")
    if "n" in conc:
        nr = conc["n"]
        if isinstance(nr, int) and not isinstance(nr, bool):
            nr = [nr, nr]
        if not isinstance(nr, (list, tuple)) or len(nr) != 2:
            raise ValidationError("concentration.n", "expected [n_min, n_max]")
        lo = _number(nr[0], "concentration.n[0]", integer=True)
        hi = _number(nr[1], "concentration.n[1]", integer=True)
        if not 1 <= lo <= hi:
            raise ValidationError("concentration.n", "need 1 <= n_min <= n_max")
        cfg.conc_n = (lo, hi)
    if "mu" in conc:
        if conc["mu"] == "lattice":
            cfg.conc_mu = "lattice"
        else:
            cfg.conc_mu = _vector(conc["mu"], "concentration.mu")
    if "tail" in conc:
        if conc["tail"] not in ("upper", "lower"):
            raise ValidationError("concentration.tail", "must be upper or lower")
        cfg.conc_tail = conc["tail"]
    if "mc_reps" in conc:
        cfg.conc_mc_reps = _number(conc["mc_reps"], "concentration.mc_reps", integer=True)
        if cfg.conc_mc_reps < 0:
            raise ValidationError("concentration.mc_reps", "must be >= 0")
    return cfg


def parse(text: str) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML: {exc}") from None
    return validate(raw)


def load_config(path) -> ExperimentConfig:
    """Read and validate a YAML experiment file.

    Raises
    ------
    ParseError
        Unreadable file or malformed YAML.
    ValidationError
        Well-formed document violating the schema; names the field.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}") from None
    return parse(text)
