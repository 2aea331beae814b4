"""Experiment configuration: a flat key=value text format with '#' comments.

"auto" fields are resolved at run time: alpha switches on node density
(0.1 below 100 nodes/km^2, 0.3 at or above), and mu is twice an a-priori
bound on the utility magnitude given the per-stage attempt budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

from .simulation import SCHEMES

ALPHA_LOW = 0.1
ALPHA_HIGH = 0.3
DENSITY_REGIME_SPLIT = 100.0

REQUIRED_KEYS = (
    "n_nodes",
    "density",
    "radius_m",
    "num_bins",
    "mean_snr_db",
    "sigma",
    "epsilon",
    "delta_explore",
    "mu",
    "alpha",
    "l_bytes",
    "rate_bps",
    "origination_rate_hz",
    "schemes",
    "regime",
    "num_stages",
    "seeds",
    "output_dir",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n_nodes: int
    densities: tuple[float, ...]
    radius_m: float
    num_bins: int
    mean_snr_db: float
    sigma: float
    epsilon: float
    step_mode: str  # "constant" or "decaying"
    delta_explore: float
    mu: Union[float, str]  # numeric or "auto"
    alpha: Union[float, str]  # numeric or "auto"
    l_bytes: int
    rate_bps: float
    origination_rate_hz: float
    schemes: tuple[str, ...]
    regime: str
    num_stages: int
    seeds: tuple[int, ...]
    output_dir: str
    delta_reliability: float = 0.9
    fixed_cap: Optional[int] = None
    require_connected: bool = True
    violation_stride: int = 0
    track_ensemble: bool = False

    @property
    def l_bits(self) -> int:
        return self.l_bytes * 8

    @property
    def slots_per_stage(self) -> int:
        """Attempt budget per stage: stage period over packet duration."""
        stage_period = 1.0 / self.origination_rate_hz
        packet_duration = self.l_bits / self.rate_bps
        return max(int(math.floor(stage_period / packet_duration)), 1)

    def resolved_alpha(self, density: float) -> float:
        if self.alpha == "auto":
            return ALPHA_LOW if density < DENSITY_REGIME_SPLIT else ALPHA_HIGH
        return float(self.alpha)

    def resolved_mu(self, alpha: float) -> float:
        if self.mu == "auto":
            return 2.0 * (1.0 + alpha * self.slots_per_stage)
        return float(self.mu)

    def validate(self) -> None:
        if self.n_nodes < 2:
            raise ConfigError("n_nodes: need at least 2 nodes")
        if not self.densities or any(d <= 0 for d in self.densities):
            raise ConfigError("density: all densities must be positive")
        for name in ("radius_m", "rate_bps", "origination_rate_hz"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be positive")
        if self.num_bins < 1:
            raise ConfigError("num_bins: must be >= 1")
        if not 0.0 <= self.sigma <= 0.5:
            raise ConfigError("sigma: must lie in [0, 1/2]")
        if self.step_mode not in ("constant", "decaying"):
            raise ConfigError(f"epsilon: unknown step mode {self.step_mode!r}")
        if self.step_mode == "constant" and not 0.0 < self.epsilon <= 1.0:
            raise ConfigError("epsilon: must lie in (0, 1]")
        if not 0.0 <= self.delta_explore < 1.0:
            raise ConfigError("delta_explore: must lie in [0, 1)")
        if self.mu != "auto" and float(self.mu) <= 0:
            raise ConfigError("mu: must be positive or 'auto'")
        if self.alpha not in ("auto",) and float(self.alpha) < 0:
            raise ConfigError("alpha: must be nonnegative or 'auto'")
        if self.l_bytes < 1:
            raise ConfigError("l_bytes: must be >= 1")
        if not self.schemes:
            raise ConfigError("schemes: at least one scheme required")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"schemes: unknown scheme {s!r}")
        if self.regime not in ("reliable", "semi_reliable"):
            raise ConfigError(f"regime: unknown regime {self.regime!r}")
        if self.num_stages < 1:
            raise ConfigError("num_stages: must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds: at least one seed required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds: seed list must be distinct")


def _parse_pairs(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


def _number(pairs: dict[str, str], key: str, cast):
    try:
        return cast(pairs[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def parse_config_text(text: str) -> ExperimentConfig:
    pairs = _parse_pairs(text)
    missing = [k for k in REQUIRED_KEYS if k not in pairs and not (
        k == "density" and "densities" in pairs
    )]
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(missing))

    density_raw = pairs.get("densities", pairs.get("density", ""))
    try:
        densities = tuple(float(x) for x in density_raw.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"density: cannot parse {density_raw!r}") from None

    eps_raw = pairs["epsilon"]
    if eps_raw == "decaying":
        step_mode, epsilon = "decaying", 0.0
    else:
        step_mode = "constant"
        epsilon = _number(pairs, "epsilon", float)

    mu_raw = pairs["mu"]
    mu: Union[float, str] = "auto" if mu_raw == "auto" else _number(pairs, "mu", float)
    alpha_raw = pairs["alpha"]
    alpha: Union[float, str] = (
        "auto" if alpha_raw in ("auto", "auto-by-density") else _number(pairs, "alpha", float)
    )

    try:
        seeds = tuple(int(x) for x in pairs["seeds"].split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"seeds: cannot parse {pairs['seeds']!r}") from None

    cfg = ExperimentConfig(
        n_nodes=_number(pairs, "n_nodes", int),
        densities=densities,
        radius_m=_number(pairs, "radius_m", float),
        num_bins=_number(pairs, "num_bins", int),
        mean_snr_db=_number(pairs, "mean_snr_db", float),
        sigma=_number(pairs, "sigma", float),
        epsilon=epsilon,
        step_mode=step_mode,
        delta_explore=_number(pairs, "delta_explore", float),
        mu=mu,
        alpha=alpha,
        l_bytes=_number(pairs, "l_bytes", int),
        rate_bps=_number(pairs, "rate_bps", float),
        origination_rate_hz=_number(pairs, "origination_rate_hz", float),
        schemes=tuple(s.strip() for s in pairs["schemes"].split(",") if s.strip()),
        regime=pairs["regime"],
        num_stages=_number(pairs, "num_stages", int),
        seeds=seeds,
        output_dir=pairs["output_dir"],
        delta_reliability=float(pairs.get("delta_reliability", 0.9)),
        fixed_cap=int(pairs["fixed_cap"]) if "fixed_cap" in pairs else None,
        require_connected=pairs.get("require_connected", "true").lower()
        in ("true", "1", "yes"),
        violation_stride=int(pairs.get("violation_stride", 0)),
        track_ensemble=pairs.get("track_ensemble", "false").lower()
        in ("true", "1", "yes"),
    )
    cfg.validate()
    return cfg


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text())


def with_overrides(cfg: ExperimentConfig, **kwargs) -> ExperimentConfig:
    out = replace(cfg, **kwargs)
    out.validate()
    return out
