"""HTTP face of the simulator: synchronous endpoints for the channel table
and the small-instance tree oracle, plus background jobs for batch runs."""

from __future__ import annotations

import threading
import traceback
import uuid
from pathlib import Path

import numpy as np
from fastapi import BackgroundTasks, FastAPI, HTTPException

from .. import __version__
from ..baselines import BroadcastTree, dump_tree_csv, gbbtc_construct, optimal_tree_oracle
from ..batch import run_batch
from ..channel import channel_table_rows, packet_success_probability, rayleigh_profile
from ..config import ConfigError, parse_config_text, with_overrides
from ..topology import load_topology_csv
from .schemas import (
    ChannelTableRequest,
    ChannelTableResponse,
    ChannelTableRow,
    HealthResponse,
    JobInfo,
    OracleRequest,
    OracleResponse,
    RunRequest,
    TreeEdge,
)

app = FastAPI(title="rtbsim", version=__version__)

_jobs: dict[str, JobInfo] = {}
_jobs_lock = threading.Lock()


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


def channel_table_csv(rows: list[dict]) -> str:
    lines = ["bin,gamma_low_db,gamma_high_db,v_k,gamma_bar_db,ber"]
    for r in rows:
        lines.append(
            f"{r['bin']},{r['gamma_low_db']!r},{r['gamma_high_db']!r},"
            f"{r['v_k']!r},{r['gamma_bar_db']!r},{r['ber']!r}"
        )
    return "\n".join(lines) + "\n"


@app.post("/channel/table", response_model=ChannelTableResponse)
def channel_table(req: ChannelTableRequest) -> ChannelTableResponse:
    try:
        profile = rayleigh_profile(
            req.num_bins, 10.0 ** (req.mean_snr_db / 10.0), req.sigma
        )
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    rows = channel_table_rows(profile)
    return ChannelTableResponse(
        rows=[ChannelTableRow(**r) for r in rows], csv=channel_table_csv(rows)
    )


def _tree_edges(tree: BroadcastTree) -> list[TreeEdge]:
    return [
        TreeEdge(node=v, parent=p, internal=v in tree.internal)
        for v, p in enumerate(tree.parent)
    ]


@app.post("/oracle/solve", response_model=OracleResponse)
def oracle_solve(req: OracleRequest) -> OracleResponse:
    try:
        topology = load_topology_csv(req.topology_csv)
        profile = rayleigh_profile(req.num_bins, 10.0 ** (req.mean_snr_db / 10.0), 0.0)
        rng = np.random.default_rng(req.seed)
        steady = [profile.bin_probability(k + 1) for k in range(profile.num_bins)]
        link_success = {}
        for i in range(topology.num_nodes):
            for j in topology.neighbors[i]:
                state = rng.choice(profile.num_bins, p=steady)
                p = packet_success_probability(profile.state_ber[state], req.l_bits)
                link_success[(i, j)] = max(p, 1e-12)
        cost, tree = optimal_tree_oracle(topology, link_success, source=req.source)
        gb_tree = gbbtc_construct(topology, link_success, source=req.source)
        gb_cost = gb_tree.expected_transmissions(link_success)
    except (ValueError, KeyError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return OracleResponse(
        optimal_cost=cost,
        optimal_tree=_tree_edges(tree),
        gbbtc_cost=gb_cost,
        gbbtc_tree=_tree_edges(gb_tree),
        tree_csv=dump_tree_csv(tree),
    )


def _apply_overrides(req: RunRequest):
    cfg = parse_config_text(req.config_text)
    overrides = {}
    if req.output_dir is not None:
        overrides["output_dir"] = req.output_dir
    if req.seeds is not None:
        overrides["seeds"] = tuple(req.seeds)
    if req.schemes is not None:
        overrides["schemes"] = tuple(req.schemes)
    if req.densities is not None:
        overrides["densities"] = tuple(req.densities)
    return with_overrides(cfg, **overrides) if overrides else cfg


def _execute_job(job_id: str, req: RunRequest) -> None:
    with _jobs_lock:
        _jobs[job_id].state = "running"
    try:
        cfg = _apply_overrides(req)
        batch = run_batch(cfg)
        out = batch.output_dir
        files = sorted(
            str(p.relative_to(out)) for p in out.rglob("*.csv")
        )
        with _jobs_lock:
            info = _jobs[job_id]
            info.state = "done"
            info.output_dir = str(out)
            info.files = files
            info.failures = {str(k): v for k, v in batch.failures.items()}
    except Exception as exc:
        with _jobs_lock:
            info = _jobs[job_id]
            info.state = "failed"
            info.detail = f"{type(exc).__name__}: {exc}"
            info.detail += "\n" + traceback.format_exc(limit=3)


@app.post("/jobs", response_model=JobInfo)
def submit_job(req: RunRequest, background: BackgroundTasks) -> JobInfo:
    try:
        _apply_overrides(req)  # fail fast on config errors
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    job_id = uuid.uuid4().hex[:12]
    info = JobInfo(job_id=job_id, state="queued")
    with _jobs_lock:
        _jobs[job_id] = info
    background.add_task(_execute_job, job_id, req)
    return info


@app.get("/jobs/{job_id}", response_model=JobInfo)
def job_status(job_id: str) -> JobInfo:
    with _jobs_lock:
        info = _jobs.get(job_id)
    if info is None:
        raise HTTPException(status_code=404, detail=f"no job {job_id}")
    return info


@app.get("/jobs/{job_id}/files/{name:path}")
def job_file(job_id: str, name: str) -> dict:
    with _jobs_lock:
        info = _jobs.get(job_id)
    if info is None or info.output_dir is None:
        raise HTTPException(status_code=404, detail="job or output not found")
    root = Path(info.output_dir).resolve()
    target = (root / name).resolve()
    if root not in target.parents and target != root:
        raise HTTPException(status_code=403, detail="path escapes the output dir")
    if not target.is_file():
        raise HTTPException(status_code=404, detail=f"no file {name}")
    return {"name": name, "content": target.read_text()}
