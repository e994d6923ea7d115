"""Batch orchestration and file emission for the four experiment modes."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bandit, concentration
from .characteristic import optimal_weights
from .config import ExperimentConfig
from .errors import Timeout
from .family import ExpFamily
from .rng import mix


def fmt(x) -> str:
    """17-significant-digit text for floats; plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if x is None:
        return ""
    return str(x)


def build_family(cfg: ExperimentConfig) -> ExpFamily:
    return ExpFamily(cfg.generator, cfg.rewards, cfg.initial)


def build_instance(cfg: ExperimentConfig, family: ExpFamily | None = None) -> bandit.BanditInstance:
    family = build_family(cfg) if family is None else family
    if cfg.thetas is not None:
        return bandit.BanditInstance(family, cfg.thetas)
    return bandit.BanditInstance.from_means(family, cfg.means)


@dataclass
class RunRecord:
    rep: int
    seed: int
    tau: int
    decision: int | None
    correct: bool | None
    status: str = "ok"
    counts: tuple = ()
    trace: list | None = None


@dataclass
class AggregateReport:
    values: dict = field(default_factory=dict)

    def lines(self):
        return [f"{k}={fmt(v)}" for k, v in self.values.items()]


def aggregate(records, instance=None, params=None) -> AggregateReport:
    """Batch statistics; recomputable exactly from ``records``."""
    done = [r for r in records if r.status == "ok"]
    errors = sum(1 for r in done if not r.correct)
    reps = len(records)
    taus = np.array([r.tau for r in done], dtype=float)
    v = {
        "replications": reps,
        "completed": len(done),
        "timeouts": reps - len(done),
        "errors": errors,
        "error_rate": errors / reps if reps else math.nan,
        "tau_mean": float(taus.mean()) if len(taus) else math.nan,
        "tau_median": float(np.median(taus)) if len(taus) else math.nan,
        "tau_p95": float(np.percentile(taus, 95)) if len(taus) else math.nan,
    }
    if params is not None:
        v["delta"] = params.delta
        v["alpha"] = params.alpha
        v["C"] = params.C
        v["tau_mean_over_log_inv_delta"] = v["tau_mean"] / math.log(1.0 / params.delta)
    if instance is not None and params is not None:
        w, T = optimal_weights(instance.family, instance.means)
        v["T_star"] = T
        for a, wa in enumerate(w):
            v[f"w_star[{a}]"] = float(wa)
        v["nonasymptotic_bound"] = bandit.nonasymptotic_lower_bound(instance, params)
    return AggregateReport(v)


def run_batch(cfg: ExperimentConfig, trace: bool = False, progress=None):
    """``cfg.replications`` seeded runs; replication ``i`` uses ``mix(seed, i)``.

    Timeouts are recorded with ``status="timeout"`` and never abort the batch.
    Returns ``(report, records)``.
    """
    instance = build_instance(cfg)
    params = bandit.StrategyParams.for_instance(instance, cfg.delta, cfg.alpha)
    records = []
    for i in range(cfg.replications):
        seed = mix(cfg.seed, i)
        try:
            r = bandit.run(instance, params, seed, trace=trace, max_samples=cfg.max_samples)
            records.append(RunRecord(i, seed, r.tau, r.decision, r.correct, "ok", r.counts, r.trace))
        except Timeout as exc:
            records.append(RunRecord(i, seed, exc.samples, None, None, "timeout"))
        if progress is not None:
            progress(i, records[-1])
    return aggregate(records, instance, params), records


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def _write_summary(path: Path, report: AggregateReport):
    path.write_text("\n".join(report.lines()) + "\n", encoding="utf-8")


def emit(report: AggregateReport, records, out_dir, cfg: ExperimentConfig | None = None):
    """Write ``runs.csv``, ``summary.txt`` and (with ``cfg``) ``config.yaml``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "runs.csv",
        ["rep", "seed", "tau", "decision", "correct", "status"],
        ([r.rep, r.seed, r.tau, r.decision, r.correct, r.status] for r in records),
    )
    traced = [r for r in records if r.trace]
    if traced:
        rows = []
        for r in traced:
            for t, arm, zs, beta in r.trace:
                for b, z in zs or [(None, None)]:
                    rows.append([r.rep, t, arm, beta, b, z])
        _write_csv(out / "trace.csv", ["rep", "t", "arm", "beta", "challenger", "z"], rows)
    _write_summary(out / "summary.txt", report)
    if cfg is not None:
        (out / "config.yaml").write_text(cfg.dump(), encoding="utf-8")
    return out


def family_tables(cfg: ExperimentConfig):
    """Rows of ``family.csv`` and ``kl.csv`` plus summary values."""
    fam = build_family(cfg)
    fam_rows = []
    for th in cfg.family_thetas:
        mem = fam.member(th)
        fam_rows.append([th, mem.log_pf, mem.mean, mem.rho])
    kl_rows = []
    for t1 in cfg.family_thetas:
        for t2 in cfg.family_thetas:
            kl_rows.append([t1, t2, fam.kl_rate_def(t1, t2), fam.kl_rate_theta(t1, t2)])
    summary = {
        "states": fam.n,
        "M": fam.M,
        "m": fam.m,
        "mu0": fam.mu0,
        "rho_bar_top": fam.limit_member(1).rho_bar,
        "rho_bar_bottom": fam.limit_member(-1).rho_bar,
        "C": fam.ratio_constant(),
        "C_approximate": fam.ratio_constant_is_approximate,
    }
    return fam_rows, kl_rows, AggregateReport(summary)


def concentration_rows(cfg: ExperimentConfig):
    """Rows ``n, mu, exact, bound, mc_estimate, mc_stderr, kl_rate``."""
    fam = build_family(cfg)
    theta = cfg.conc_theta
    mu_theta = fam.mean(theta)
    upper = cfg.conc_tail == "upper"
    g, L = concentration.lattice(fam.f) if cfg.conc_mu == "lattice" else (None, None)
    rows = []
    for n in range(cfg.conc_n[0], cfg.conc_n[1] + 1):
        if cfg.conc_mu == "lattice":
            lo, hi = int(n * g.min()), int(n * g.max())
            levels = [k / (n * L) for k in range(lo, hi + 1)]
        else:
            levels = list(cfg.conc_mu)
        for mu in levels:
            if upper and not mu_theta <= mu <= fam.M:
                continue
            if not upper and not fam.m <= mu <= mu_theta:
                continue
            exact = concentration.exact_tail(fam, theta, n, mu, upper=upper)
            if upper:
                bound = concentration.tail_bound(fam, theta, n, mu)
            else:
                bound = concentration.tail_bound_lower(fam, theta, n, mu)
            if cfg.conc_mc_reps:
                est, se = concentration.mc_tail(
                    fam, theta, n, mu, cfg.conc_mc_reps, mix(cfg.seed, n), upper=upper
                )
            else:
                est = se = math.nan
            rows.append([n, mu, exact, bound, est, se, fam.kl_rate_mean(mu, mu_theta)])
    summary = {
        "theta": theta,
        "mu_theta": mu_theta,
        "tail": cfg.conc_tail,
        "C": fam.ratio_constant(),
        "C_approximate": fam.ratio_constant_is_approximate,
        "rows": len(rows),
        "violations": sum(1 for r in rows if r[2] > r[3]),
    }
    return rows, AggregateReport(summary)


def lower_bound_rows(cfg: ExperimentConfig):
    fam = build_family(cfg)
    inst = build_instance(cfg, fam)
    w, T = optimal_weights(fam, inst.means)
    rows = [[a, float(wa)] for a, wa in enumerate(w)]
    rows.append(["T_star", T])
    summary = {"K": inst.K, "best_arm": inst.best, "T_star": T, "C": fam.ratio_constant()}
    for a, mu in enumerate(inst.means):
        summary[f"mean[{a}]"] = float(mu)
    for d in cfg.deltas:
        params = bandit.StrategyParams.for_instance(inst, d, cfg.alpha)
        lb = bandit.nonasymptotic_lower_bound(inst, params)
        rows.append([f"nonasymptotic_bound[delta={d!r}]", lb])
        summary[f"nonasymptotic_bound[delta={d!r}]"] = lb
    return rows, AggregateReport(summary)


def run_mode(cfg: ExperimentConfig, out_dir, trace: bool = False):
    """Execute ``cfg.mode`` and write its files; returns the output directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.mode == "run":
        report, records = run_batch(cfg, trace=trace)
        return emit(report, records, out, cfg)
    if cfg.mode == "family":
        fam_rows, kl_rows, report = family_tables(cfg)
        _write_csv(out / "family.csv", ["theta", "log_pf", "mean", "rho"], fam_rows)
        _write_csv(out / "kl.csv", ["theta1", "theta2", "kl_def", "kl_theta"], kl_rows)
    elif cfg.mode == "concentration":
        rows, report = concentration_rows(cfg)
        _write_csv(
            out / "concentration.csv",
            ["n", "mu", "exact", "bound", "mc_estimate", "mc_stderr", "kl_rate"],
            rows,
        )
    elif cfg.mode == "lower-bound":
        rows, report = lower_bound_rows(cfg)
        _write_csv(out / "lower_bound.csv", ["arm", "w_star"], rows)
    else:
        raise ValueError(f"unknown mode {cfg.mode!r}")
    _write_summary(out / "summary.txt", report)
    (out / "config.yaml").write_text(cfg.dump(), encoding="utf-8")
    return out
