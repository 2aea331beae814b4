"""Broadcast forwarding control over slow-fading links: regret-based
learners, finite-state Markov channels, baseline schemes, and a seeded
simulation harness."""

from .channel import (
    FadingProfile,
    FsmcLink,
    expected_retransmissions,
    make_equal_probability_bins,
    packet_success_probability,
    rayleigh_profile,
    semi_reliable_quantile,
)
from .config import ExperimentConfig, load_config, parse_config_text
from .regret import LearnerParams, RegretLearner
from .simulation import SimulationResult, StageConfig, run_simulation
from .topology import Topology, generate_topology

__all__ = [
    "FadingProfile",
    "FsmcLink",
    "ExperimentConfig",
    "LearnerParams",
    "RegretLearner",
    "SimulationResult",
    "StageConfig",
    "Topology",
    "expected_retransmissions",
    "generate_topology",
    "load_config",
    "make_equal_probability_bins",
    "packet_success_probability",
    "parse_config_text",
    "rayleigh_profile",
    "run_simulation",
    "semi_reliable_quantile",
]

__version__ = "0.1.0"
