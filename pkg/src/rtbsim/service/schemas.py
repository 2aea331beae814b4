"""Request/response models of the HTTP service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class ChannelTableRequest(BaseModel):
    num_bins: int = Field(default=8, ge=1)
    mean_snr_db: float = 0.0
    sigma: float = Field(default=0.05, ge=0.0, le=0.5)


class ChannelTableRow(BaseModel):
    bin: int
    gamma_low_db: float
    gamma_high_db: float
    v_k: float
    gamma_bar_db: float
    ber: float


class ChannelTableResponse(BaseModel):
    rows: list[ChannelTableRow]
    csv: str


class OracleRequest(BaseModel):
    topology_csv: str  # the dump format: '# side_m=.. radius_m=..' header
    num_bins: int = Field(default=8, ge=1)
    mean_snr_db: float = 0.0
    l_bits: int = Field(default=4096, ge=1)
    seed: int = 0
    source: int = 0


class TreeEdge(BaseModel):
    node: int
    parent: Optional[int]
    internal: bool


class OracleResponse(BaseModel):
    optimal_cost: float
    optimal_tree: list[TreeEdge]
    gbbtc_cost: float
    gbbtc_tree: list[TreeEdge]
    tree_csv: str


class RunRequest(BaseModel):
    config_text: str
    output_dir: Optional[str] = None  # overrides the config's output_dir
    seeds: Optional[list[int]] = None
    schemes: Optional[list[str]] = None
    densities: Optional[list[float]] = None  # set by the sweep verb


class JobInfo(BaseModel):
    job_id: str
    state: str  # queued | running | done | failed
    detail: str = ""
    output_dir: Optional[str] = None
    files: list[str] = []
    failures: dict[str, str] = {}


class HealthResponse(BaseModel):
    status: str
    version: str
