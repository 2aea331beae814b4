"""Seeded batch execution, aggregation and CSV emission.

Output layout under the configured directory:
  runs/<scheme>_d<density>_s<seed>_metrics.csv
      stage,delivery_ratio,total_tx,scheme,seed,cum_delivery_ratio
  runs/<scheme>_d<density>_s<seed>_load.csv
      node,total_tx_over_run
  runs/<scheme>_d<density>_s<seed>_violations.csv   (when tracking is on)
      stage,ensemble_id,max_violation
  stagewise_<scheme>_d<density>.csv
      stage,mean_delivery,ci_delivery,mean_total_tx,ci_total_tx
  density_sweep.csv
      density,scheme,steady_state_tx_mean,ci
  load_summary.csv
      scheme,density,jain_mean,stddev_mean

Confidence half-widths are 95% Student-t across seeds; the steady-state
window is the last 20% of stages.  All outputs are pure functions of the
configuration content.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .channel import rayleigh_profile
from .config import ExperimentConfig
from .regret import LearnerParams
from .simulation import (
    LEARNER_SCHEMES,
    SCHEMES,
    SimulationResult,
    StageConfig,
    run_simulation,
)
from .equilibrium import MAX_ENSEMBLE_PLAYERS
from .topology import Topology, generate_topology, player_ensemble

STEADY_STATE_FRACTION = 0.2
MAX_FAILURE_FRACTION = 0.1


class BatchError(RuntimeError):
    pass


def fairness_metrics(per_node_tx: Sequence[float]) -> tuple[float, float]:
    """Jain index and standard deviation of a per-node transmission vector."""
    x = np.asarray(per_node_tx, dtype=float)
    if x.size == 0:
        raise ValueError("need a nonempty count vector")
    total_sq = x.sum() ** 2
    denom = x.size * (x**2).sum()
    jain = 1.0 if denom == 0.0 else total_sq / denom
    return float(jain), float(x.std())


def confidence_half_width(samples: Sequence[float], level: float = 0.95) -> float:
    """Student-t half-width of the mean across seeds (0 for one sample)."""
    x = np.asarray(samples, dtype=float)
    if x.size <= 1:
        return 0.0
    t = stats.t.ppf(0.5 + level / 2.0, df=x.size - 1)
    return float(t * x.std(ddof=1) / math.sqrt(x.size))


def steady_window(num_stages: int) -> int:
    """First stage index (0-based) of the steady-state window."""
    return num_stages - max(int(math.ceil(num_stages * STEADY_STATE_FRACTION)), 1)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def sim_seed_for(scheme: str, seed: int) -> int:
    """Per-(scheme, seed) stream; the topology depends on the seed alone."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(SCHEMES.index(scheme),))
    return int(ss.generate_state(1)[0])


def default_ensemble(topology: Topology) -> tuple[int, ...]:
    """Players tracked by the CE diagnostic: the densest node's ensemble,
    truncated to the tracker's size limit by ascending index."""
    center = max(range(topology.num_nodes), key=topology.degree)
    members = player_ensemble(topology, center)
    if len(members) > MAX_ENSEMBLE_PLAYERS:
        keep = [center] + [m for m in members if m != center]
        members = tuple(sorted(keep[:MAX_ENSEMBLE_PLAYERS]))
    return members


def run_one(
    cfg: ExperimentConfig, scheme: str, density: float, seed: int
) -> tuple[SimulationResult, Topology]:
    """One seeded simulation run: topology generation plus the stage loop."""
    topo_rng = np.random.default_rng(seed)
    topology = generate_topology(
        cfg.n_nodes,
        density,
        cfg.radius_m,
        topo_rng,
        require_connected=cfg.require_connected,
    )
    alpha = cfg.resolved_alpha(density)
    params = LearnerParams(
        epsilon=cfg.epsilon if cfg.step_mode == "constant" else 0.1,
        decaying=cfg.step_mode == "decaying",
        delta_explore=cfg.delta_explore,
        mu=cfg.resolved_mu(alpha),
        alpha=alpha,
    )
    stage_cfg = StageConfig(
        scheme=scheme,
        slots_per_stage=cfg.slots_per_stage,
        l_bits=cfg.l_bits,
        alpha=alpha,
        regime=cfg.regime,
        delta_reliability=cfg.delta_reliability,
        fixed_cap=cfg.fixed_cap,
    )
    profile = rayleigh_profile(cfg.num_bins, 10.0 ** (cfg.mean_snr_db / 10.0), cfg.sigma)
    ensembles = None
    stride = 0
    if cfg.track_ensemble and scheme in LEARNER_SCHEMES:
        ensembles = [default_ensemble(topology)]
        stride = cfg.violation_stride or max(cfg.num_stages // 50, 1)
    result = run_simulation(
        topology,
        profile,
        stage_cfg,
        params,
        cfg.num_stages,
        seed=sim_seed_for(scheme, seed),
        ensembles=ensembles,
        violation_stride=stride,
    )
    result.seed = seed
    return result, topology


@dataclass
class BatchResult:
    config: ExperimentConfig
    completed: dict[tuple[str, float, int], SimulationResult] = field(default_factory=dict)
    failures: dict[tuple[str, float, int], str] = field(default_factory=dict)
    output_dir: Optional[Path] = None

    def seeds_for(self, scheme: str, density: float) -> list[int]:
        return [
            s
            for (sch, d, s) in self.completed
            if sch == scheme and d == density
        ]


def write_run_csvs(out: Path, result: SimulationResult, density: float) -> None:
    tag = f"{result.scheme}_d{density:g}_s{result.seed}"
    runs = out / "runs"
    runs.mkdir(parents=True, exist_ok=True)
    cum = np.cumsum(result.delivery_ratio) / np.arange(1, result.num_stages + 1)
    lines = ["stage,delivery_ratio,total_tx,scheme,seed,cum_delivery_ratio"]
    for idx in range(result.num_stages):
        lines.append(
            f"{idx + 1},{_fmt(result.delivery_ratio[idx])},{int(result.total_tx[idx])},"
            f"{result.scheme},{result.seed},{_fmt(cum[idx])}"
        )
    (runs / f"{tag}_metrics.csv").write_text("\n".join(lines) + "\n")

    load = result.run_load()
    lines = ["node,total_tx_over_run"]
    for node, tx in enumerate(load):
        lines.append(f"{node},{int(tx)}")
    (runs / f"{tag}_load.csv").write_text("\n".join(lines) + "\n")

    if result.violations:
        lines = ["stage,ensemble_id,max_violation"]
        for stage, ens_id, violation in result.violations:
            lines.append(f"{stage},{ens_id},{_fmt(violation)}")
        (runs / f"{tag}_violations.csv").write_text("\n".join(lines) + "\n")


def run_batch(cfg: ExperimentConfig, out_dir: Optional[str] = None) -> BatchResult:
    """Execute every (scheme, density, seed) run and write all CSV outputs."""
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    batch = BatchResult(config=cfg, output_dir=out)
    total = 0
    for scheme in cfg.schemes:
        for density in cfg.densities:
            for seed in cfg.seeds:
                total += 1
                key = (scheme, density, seed)
                try:
                    result, _ = run_one(cfg, scheme, density, seed)
                except Exception as exc:  # recorded, run skipped
                    batch.failures[key] = f"{type(exc).__name__}: {exc}"
                    continue
                batch.completed[key] = result
                write_run_csvs(out, result, density)
    if len(batch.failures) > MAX_FAILURE_FRACTION * total:
        raise BatchError(
            f"{len(batch.failures)} of {total} runs failed: "
            + "; ".join(f"{k}: {v}" for k, v in batch.failures.items())
        )
    emit_summary(batch)
    return batch


def emit_summary(batch: BatchResult) -> None:
    """Write the stagewise, density-sweep and load-summary CSV files."""
    cfg = batch.config
    out = batch.output_dir
    assert out is not None

    for scheme in cfg.schemes:
        for density in cfg.densities:
            results = [
                batch.completed[(scheme, density, s)]
                for s in cfg.seeds
                if (scheme, density, s) in batch.completed
            ]
            lines = ["stage,mean_delivery,ci_delivery,mean_total_tx,ci_total_tx"]
            if results:
                deliveries = np.stack([r.delivery_ratio for r in results])
                txs = np.stack([r.total_tx for r in results]).astype(float)
                for idx in range(cfg.num_stages):
                    lines.append(
                        f"{idx + 1},{_fmt(deliveries[:, idx].mean())},"
                        f"{_fmt(confidence_half_width(deliveries[:, idx]))},"
                        f"{_fmt(txs[:, idx].mean())},"
                        f"{_fmt(confidence_half_width(txs[:, idx]))}"
                    )
            path = out / f"stagewise_{scheme}_d{density:g}.csv"
            path.write_text("\n".join(lines) + "\n")

    sweep_lines = ["density,scheme,steady_state_tx_mean,ci"]
    load_lines = ["scheme,density,jain_mean,stddev_mean"]
    start = steady_window(cfg.num_stages)
    for density in cfg.densities:
        for scheme in cfg.schemes:
            results = [
                batch.completed[(scheme, density, s)]
                for s in cfg.seeds
                if (scheme, density, s) in batch.completed
            ]
            if not results:
                continue
            steady = [float(r.total_tx[start:].mean()) for r in results]
            sweep_lines.append(
                f"{density:g},{scheme},{_fmt(np.mean(steady))},"
                f"{_fmt(confidence_half_width(steady))}"
            )
            jains, stds = zip(*(fairness_metrics(r.run_load()) for r in results))
            load_lines.append(
                f"{scheme},{density:g},{_fmt(np.mean(jains))},{_fmt(np.mean(stds))}"
            )
    (out / "density_sweep.csv").write_text("\n".join(sweep_lines) + "\n")
    (out / "load_summary.csv").write_text("\n".join(load_lines) + "\n")
