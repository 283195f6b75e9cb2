"""Deterministic experiment orchestration: simulate -> filter -> detect -> analyze.

Output files (``i`` indexes the configured ``sim.alpha`` values):

* ``trajectories_a{i}.csv`` - one row per (trajectory, step)
* ``jumps_a{i}.csv`` - one row per trajectory
* ``histogram_a{i}_{all,even,odd}.csv`` - jump-count histograms
* ``decay.csv``, ``correlation.csv`` - ensemble curves with model predictions
* ``fit.csv`` - fitted decay time and the demolition-model prediction
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import (
    DecayModel,
    analytic_parity,
    demolition_tau_tot,
    empirical_correlation_average,
    ensemble_mean,
    fit_global_decay,
    predicted_correlation_average,
)
from .config import ExperimentConfig
from .csvio import TRAJECTORY_COLUMNS, read_trajectory_file, write_csv, write_trajectories
from .errors import IndeterminateParityError, InconclusiveError, StageDependencyError
from .jumps import count_jumps, histogram_from_counts
from .quantum_filter import run_filter_batch
from .trajectory import derive_seed, simulate_ensemble, stack

__all__ = ["STAGES", "GroupData", "run_pipeline"]

log = logging.getLogger(__name__)

STAGES = ("simulate", "filter", "detect", "analyze")


@dataclass
class GroupData:
    """Everything the pipeline knows about one ``alpha`` ensemble."""

    index: int
    sim: object
    trajectory_ids: list
    outcomes: np.ndarray
    records: list | None = None
    filter_parity: np.ndarray | None = None
    reports: list = field(default_factory=list)

    @property
    def valid(self) -> np.ndarray:
        if self.records is None:
            return np.ones(len(self.trajectory_ids), dtype=bool)
        return np.array([not r.overflow for r in self.records])


def _parse_stages(stages) -> list[str]:
    if isinstance(stages, str):
        stages = [s.strip() for s in stages.split(",") if s.strip()]
    stages = list(stages)
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise StageDependencyError(f"unknown stage(s) {unknown}; choose from {STAGES}")
    return [s for s in STAGES if s in stages]


def _meta(config: ExperimentConfig, **extra) -> dict:
    meta = {"config_hash": config.config_hash, "base_seed": config.base_seed}
    meta.update(extra)
    return meta


def _simulate(config: ExperimentConfig) -> list[GroupData]:
    groups = []
    for i, sim in enumerate(config.sims):
        records = simulate_ensemble(
            sim,
            config.readout,
            config.n_traj,
            derive_seed(config.base_seed, i),
            workers=config["ensemble.workers"],
        )
        n_over = sum(r.overflow for r in records)
        if n_over:
            log.warning("alpha=%g: %d trajectories hit the truncation and are excluded from statistics", abs(sim.alpha), n_over)
        groups.append(
            GroupData(
                index=i,
                sim=sim,
                trajectory_ids=list(range(len(records))),
                outcomes=stack(records, "outcomes"),
                records=records,
            )
        )
    return groups


def _ingest(config: ExperimentConfig, path) -> list[GroupData]:
    _, data = read_trajectory_file(path)
    if not data:
        raise InconclusiveError(f"{path}: no trajectories")
    lengths = {len(d["outcomes"]) for d in data.values()}
    if len(lengths) != 1:
        raise StageDependencyError(f"{path}: ingested trajectories must share one length, got {sorted(lengths)}")
    ids = list(data)
    g = GroupData(
        index=0,
        sim=config.sims[0],
        trajectory_ids=ids,
        outcomes=np.stack([data[t]["outcomes"] for t in ids]),
    )
    if all("filter_parity" in d for d in data.values()):
        g.filter_parity = np.stack([data[t]["filter_parity"] for t in ids])
    return [g]


def _write_group_trajectories(config, g: GroupData, out: Path) -> Path:
    path = out / f"trajectories_a{g.index}.csv"
    meta = _meta(config, alpha=repr(abs(g.sim.alpha)), tau_i_us=repr(g.sim.tau_i))
    if g.records is not None:
        return write_trajectories(path, g.records, g.filter_parity, meta, g.trajectory_ids)
    tau_i = g.sim.tau_i

    def rows():
        for j, tid in enumerate(g.trajectory_ids):
            for k, c in enumerate(g.outcomes[j]):
                fp = None if g.filter_parity is None else float(g.filter_parity[j, k])
                yield (tid, k, k * tau_i, None, None, int(c), fp)

    return write_csv(path, TRAJECTORY_COLUMNS, rows(), meta)


def _detect(config, g: GroupData, out: Path) -> dict:
    times = np.arange(g.outcomes.shape[1]) * g.sim.tau_i
    rows = []
    counts = {"all": [], "even": [], "odd": []}
    g.reports = []
    valid = g.valid
    for j, tid in enumerate(g.trajectory_ids):
        try:
            rep = count_jumps(g.filter_parity[j], times, config.schmitt)
        except IndeterminateParityError:
            rows.append((tid, None, None, None, "", "", "indeterminate"))
            g.reports.append(None)
            continue
        g.reports.append(rep)
        status = "ok" if valid[j] else "overflow"
        rows.append(
            (
                tid,
                rep.jump_count,
                rep.initial_parity,
                rep.final_parity,
                ";".join(repr(float(t)) for t in rep.transition_times),
                ";".join(repr(float(t)) for t in rep.response_times),
                status,
            )
        )
        if valid[j]:
            counts["all"].append(rep.jump_count)
            counts["even" if rep.initial_parity == 1 else "odd"].append(rep.jump_count)
    meta = _meta(config, alpha=repr(abs(g.sim.alpha)), schmitt_hi=repr(config.schmitt.hi), schmitt_lo=repr(config.schmitt.lo))
    paths = {
        f"jumps_a{g.index}": write_csv(
            out / f"jumps_a{g.index}.csv",
            ("trajectory_id", "jump_count", "initial_parity", "final_parity", "transition_times_us", "response_times_us", "status"),
            rows,
            meta,
        )
    }
    for label, c in counts.items():
        h = histogram_from_counts(c)
        freq = h.frequencies
        paths[f"histogram_a{g.index}_{label}"] = write_csv(
            out / f"histogram_a{g.index}_{label}.csv",
            ("count", "frequency"),
            ((k, float(freq[k])) for k in range(len(freq))),
            dict(meta, post_select=label, n_reports=h.n_reports),
        )
    return paths


def _analyze(config, groups: list[GroupData], out: Path) -> dict:
    decay_rows, corr_rows, curves = [], [], []
    for g in groups:
        sim = g.sim
        times = np.arange(g.outcomes.shape[1]) * sim.tau_i
        valid = g.valid
        if not valid.any():
            raise InconclusiveError(f"alpha={abs(sim.alpha):g}: every trajectory overflowed the truncation")
        a = abs(sim.alpha)
        fstats = ensemble_mean(g.filter_parity[valid])
        model = analytic_parity(times, a, sim.kappa, sim.n_th)
        for k, t in enumerate(times):
            decay_rows.append((a, float(t), float(fstats.mean[k]), float(fstats.sem[k]), float(model[k])))
        curves.append((a, times, fstats.mean))
        cstats = empirical_correlation_average(g.outcomes[valid])
        pred = predicted_correlation_average(times, a, sim.kappa, config.readout, sim.n_th)
        for k, t in enumerate(times):
            corr_rows.append((a, float(t), float(cstats.mean[k]), float(cstats.sem[k]), float(pred[k])))
    meta = _meta(config)
    cols = ("alpha", "t_us", "value", "sem", "model")
    paths = {
        "decay": write_csv(out / "decay.csv", cols, decay_rows, meta),
        "correlation": write_csv(out / "correlation.csv", cols, corr_rows, meta),
    }
    dm = DecayModel(config["analysis.tau_0_us"], config["analysis.P_D"], config["sim.tau_i_us"])
    fit_row = [None, None, None, len(curves)]
    if len({c[0] for c in curves}) >= 2:
        fit = fit_global_decay(curves, config["sim.n_th"])
        fit_row = [fit.params["tau"], fit.uncertainty["tau"], fit.residual_norm, len(curves)]
    else:
        log.info("global decay fit skipped: needs at least two distinct alpha values")
    paths["fit"] = write_csv(
        out / "fit.csv",
        ("tau_fit_us", "tau_sigma_us", "residual_norm", "n_curves", "demolition_tau_tot_us", "tau_0_us", "P_D"),
        [fit_row + [demolition_tau_tot(dm), dm.tau_0, dm.P_D]],
        meta,
    )
    return paths


def run_pipeline(config: ExperimentConfig, stages=STAGES, out_dir=None, outcomes_path=None) -> dict[str, Path]:
    """Run the requested stages in order and return the written files by name.

    With ``outcomes_path`` the outcome records are read from a trajectory CSV
    instead of being simulated.
    """
    stages = _parse_stages(stages)
    out = Path(out_dir) if out_dir is not None else config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, Path] = {}

    if outcomes_path is not None:
        if "simulate" in stages:
            raise StageDependencyError("cannot both simulate and ingest outcomes")
        groups = _ingest(config, outcomes_path)
    elif "simulate" in stages:
        groups = _simulate(config)
    else:
        raise StageDependencyError(f"stages {stages} need either 'simulate' or ingested outcomes")

    if "filter" in stages:
        for g in groups:
            g.filter_parity = run_filter_batch(g.outcomes, g.sim, config.readout, config.filter)
    if "simulate" in stages or "filter" in stages:
        for g in groups:
            artifacts[f"trajectories_a{g.index}"] = _write_group_trajectories(config, g, out)

    if "detect" in stages or "analyze" in stages:
        missing = [g.index for g in groups if g.filter_parity is None]
        if missing:
            raise StageDependencyError("detect/analyze need filter output; add the 'filter' stage")
    if "detect" in stages:
        for g in groups:
            artifacts.update(_detect(config, g, out))
    if "analyze" in stages:
        artifacts.update(_analyze(config, groups, out))
    return artifacts
