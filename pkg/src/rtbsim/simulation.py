"""Stage-by-stage broadcast simulation over fading links.

One stage disseminates one source message.  A stage is divided into packet
slots; every directed link advances its Markov bin once per slot, and every
node that holds the message and chose to forward makes one broadcast
attempt per slot until its coverage target is met or its attempt budget is
spent.  Each successful reception triggers an ACK that every neighbor of
the receiver overhears, updating their covered sets whether or not they
hold the message themselves yet.  Learner-driven nodes update their regret state when the next
message arrives (the expiration of the previous one).

Randomness contract: a single generator per run, consumed in a documented
order - initial bin draw, then per slot: one vector of channel moves, then
for each active forwarder in ascending node index one vector of delivery
draws over its uncovered neighbors (sorted), with action draws of fresh
receivers taken immediately in success order.  Identical configuration and
seed give bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import baselines
from .channel import (
    FadingProfile,
    expected_retransmissions,
    packet_success_probability,
    semi_reliable_quantile,
)
from .equilibrium import EmpiricalPlay, FiniteGame, ce_check
from .regret import DROP, FORWARD, LearnerParams, RegretLearner, StageOutcome
from .topology import Topology

SCHEMES = ("rtb", "enhanced_rtb", "flooding", "mpr", "gbbtc")
LEARNER_SCHEMES = ("rtb", "enhanced_rtb")


class ConfigurationError(ValueError):
    """Inconsistent simulation configuration detected before stage 1."""


class ProtocolViolationError(RuntimeError):
    """An operation was invoked outside its protocol precondition."""


@dataclass(frozen=True)
class StageConfig:
    scheme: str = "rtb"
    slots_per_stage: int = 24
    l_bits: int = 4096
    alpha: float = 0.1
    regime: str = "reliable"  # or "semi_reliable"
    delta_reliability: float = 0.9  # quantile level in the semi-reliable regime
    fixed_cap: Optional[int] = None  # semi-reliable cap when CSI is unavailable
    source: int = 0

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if self.slots_per_stage < 1:
            raise ConfigurationError("slots_per_stage must be >= 1")
        if self.l_bits < 1:
            raise ConfigurationError("l_bits must be >= 1")
        if self.regime not in ("reliable", "semi_reliable"):
            raise ConfigurationError(f"unknown regime {self.regime!r}")
        if self.regime == "semi_reliable" and not 0.0 < self.delta_reliability < 1.0:
            raise ConfigurationError("delta_reliability must lie in (0, 1)")


@dataclass(frozen=True)
class MetricsRecord:
    stage: int
    delivery_ratio: float
    total_transmissions: int
    per_node_transmissions: tuple[int, ...]
    reached: int


@dataclass
class SimulationResult:
    scheme: str
    seed: int
    delivery_ratio: np.ndarray
    total_tx: np.ndarray
    per_node_tx: np.ndarray  # (num_stages, n)
    reached: np.ndarray
    violations: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def num_stages(self) -> int:
        return len(self.delivery_ratio)

    def record(self, stage: int) -> MetricsRecord:
        idx = stage - 1
        return MetricsRecord(
            stage=stage,
            delivery_ratio=float(self.delivery_ratio[idx]),
            total_transmissions=int(self.total_tx[idx]),
            per_node_transmissions=tuple(int(x) for x in self.per_node_tx[idx]),
            reached=int(self.reached[idx]),
        )

    def run_load(self) -> np.ndarray:
        return self.per_node_tx.sum(axis=0)


def instantaneous_utility(
    action: int, covered: int, degree: int, attempts: int, alpha: float
) -> float:
    """Coverage fraction minus scaled attempt count on forward stages."""
    if degree <= 0:
        raise ProtocolViolationError("utility undefined for an isolated node")
    r = covered / degree
    return r - alpha * attempts if action == FORWARD else r


def forwarding_stage_game(
    topology: Topology,
    ensemble: Sequence[int],
    expected_costs: Sequence[float],
    alpha: float,
) -> FiniteGame:
    """Deterministic per-state game model used by the CE diagnostic.

    A forwarder covers its whole neighborhood (reliable regime) at its
    model cost; a dropper's reward is the fraction of its neighbors lying in
    some ensemble forwarder's neighborhood.
    """
    members = tuple(ensemble)
    counts = (2,) * len(members)
    utilities = [np.zeros(counts) for _ in members]
    neighbor_sets = [set(topology.neighbors[i]) for i in members]
    for profile in np.ndindex(*counts):
        holding = set(members)  # every player holds the message this stage
        for k, a in enumerate(profile):
            if a == FORWARD:
                holding |= neighbor_sets[k]
        for k in range(len(members)):
            deg = len(neighbor_sets[k])
            if profile[k] == FORWARD:
                utilities[k][profile] = 1.0 - alpha * expected_costs[k]
            else:
                utilities[k][profile] = len(neighbor_sets[k] & holding) / deg
    return FiniteGame(action_counts=counts, utilities=tuple(utilities))


class _NodeStage:
    """Per-node scratch state for the current stage."""

    __slots__ = (
        "handled",
        "action",
        "attempts",
        "cap",
        "strategy",
        "expected_cost",
    )

    def __init__(self) -> None:
        self.handled = False
        self.action = DROP
        self.attempts = 0
        self.cap = 0
        self.strategy = None
        self.expected_cost = None


def run_simulation(
    topology: Topology,
    profile: FadingProfile,
    stage_cfg: StageConfig,
    learner_params: LearnerParams,
    num_stages: int,
    seed: int,
    ensembles: Optional[Sequence[Sequence[int]]] = None,
    violation_stride: int = 0,
) -> SimulationResult:
    sim = BroadcastSimulation(
        topology, profile, stage_cfg, learner_params, seed, ensembles
    )
    return sim.run(num_stages, violation_stride)


class BroadcastSimulation:
    def __init__(
        self,
        topology: Topology,
        profile: FadingProfile,
        stage_cfg: StageConfig,
        learner_params: LearnerParams,
        seed: int,
        ensembles: Optional[Sequence[Sequence[int]]] = None,
    ) -> None:
        n = topology.num_nodes
        src = stage_cfg.source
        if not 0 <= src < n:
            raise ConfigurationError(f"source index {src} out of range")
        if any(len(nb) == 0 for nb in topology.neighbors):
            raise ConfigurationError("every node needs at least one neighbor")
        self.topology = topology
        self.profile = profile
        self.cfg = stage_cfg
        self.params = learner_params
        self.rng = np.random.default_rng(seed)
        self.seed = seed

        self.nbrs = [np.array(nb, dtype=np.int64) for nb in topology.neighbors]
        self.degrees = np.array([len(nb) for nb in topology.neighbors])

        # directed link table, sorted by (src, dst)
        links = [
            (i, j) for i in range(n) for j in topology.neighbors[i]
        ]
        self.link_of = {lk: idx for idx, lk in enumerate(links)}
        self.out_links = [
            np.array([self.link_of[(i, j)] for j in topology.neighbors[i]])
            for i in range(n)
        ]
        self.num_links = len(links)

        k = profile.num_bins
        self.num_bins = k
        self.sigma = profile.sigma
        self.p_by_bin = np.array(
            [
                packet_success_probability(profile.state_ber[b], stage_cfg.l_bits)
                for b in range(k)
            ]
        )
        steady = np.array([profile.bin_probability(b + 1) for b in range(k)])
        self.states = self.rng.choice(k, size=self.num_links, p=steady)

        scheme = stage_cfg.scheme
        self.learners: list[Optional[RegretLearner]] = [None] * n
        if scheme in LEARNER_SCHEMES:
            mode = "csi" if scheme == "enhanced_rtb" else "proxy"
            for i in range(n):
                if i != src:
                    self.learners[i] = RegretLearner(learner_params, mode)
        self.mpr_sets: Optional[list[frozenset[int]]] = None
        if scheme == "mpr":
            self.mpr_sets = [
                frozenset(baselines.mpr_select(topology, i)) for i in range(n)
            ]
        self.tree: Optional[baselines.BroadcastTree] = None
        self.tree_targets: Optional[list[np.ndarray]] = None
        if scheme == "gbbtc":
            # floor keeps dead links finite-cost so best response can avoid them
            link_success = {
                lk: max(float(self.p_by_bin[self.states[idx]]), 1e-12)
                for lk, idx in self.link_of.items()
            }
            self.tree = baselines.gbbtc_construct(topology, link_success, source=src)
            self.tree_targets = [
                np.array(self.tree.children(i), dtype=np.int64) for i in range(n)
            ]

        self.ensembles = [tuple(e) for e in (ensembles or [])]
        z_eps = 1.0 if learner_params.decaying else learner_params.epsilon
        self.z_trackers = [EmpiricalPlay(e, min(z_eps, 1.0)) for e in self.ensembles]

        self.last_handled_seq = np.full(n, -1, dtype=np.int64)
        self.pending: list[Optional[StageOutcome]] = [None] * n

    # -- channel ---------------------------------------------------------

    def _advance_channel(self, slots: int = 1) -> None:
        if self.num_bins == 1 or self.sigma == 0.0 or slots < 1:
            return
        draws = self.rng.random((slots, self.num_links))
        for row in draws:
            move = np.zeros(self.num_links, dtype=np.int64)
            move[row < self.sigma] = -1
            move[(row >= self.sigma) & (row < 2.0 * self.sigma)] = 1
            self.states = (self.states + move) % self.num_bins

    def _out_success_probs(self, i: int) -> np.ndarray:
        return self.p_by_bin[self.states[self.out_links[i]]]

    # -- per-stage protocol ----------------------------------------------

    def _attempt_cap(self, i: int) -> int:
        cap = self.cfg.slots_per_stage
        if self.cfg.regime != "semi_reliable" or i == self.cfg.source:
            return cap
        if self.cfg.scheme == "enhanced_rtb":
            # bounded scan: the stage budget caps the quantile anyway
            probs = self._out_success_probs(i)
            if np.any(probs <= 0.0):
                return cap
            for c in range(1, cap):
                if np.prod(1.0 - (1.0 - probs) ** c) >= self.cfg.delta_reliability:
                    return c
            return cap
        if self.cfg.fixed_cap is not None:
            return min(cap, self.cfg.fixed_cap)
        return cap

    def _choose_action(self, i: int, from_node: Optional[int]) -> int:
        scheme = self.cfg.scheme
        if i == self.cfg.source or scheme == "flooding":
            return FORWARD
        if scheme == "mpr":
            assert self.mpr_sets is not None and from_node is not None
            return FORWARD if i in self.mpr_sets[from_node] else DROP
        if scheme == "gbbtc":
            assert self.tree is not None
            return FORWARD if i in self.tree.internal else DROP
        learner = self.learners[i]
        assert learner is not None
        return learner.act(self.rng)

    def _model_cost(self, i: int) -> float:
        """Expected attempts from current bins, clamped to the stage budget."""
        probs = self._out_success_probs(i)
        if np.any(probs <= 0.0):
            return float(self.cfg.slots_per_stage)
        return min(
            expected_retransmissions(probs), float(self.cfg.slots_per_stage)
        )

    def _receive(
        self,
        i: int,
        seq: int,
        from_node: Optional[int],
        stage_state: list[_NodeStage],
    ) -> None:
        st = stage_state[i]
        if st.handled:
            return
        learner = self.learners[i]
        if learner is not None:
            if self.last_handled_seq[i] == seq - 1 and self.pending[i] is not None:
                learner.observe(self.pending[i])
            self.pending[i] = None  # a missed stage discards the stale record
        st.handled = True
        self.last_handled_seq[i] = seq
        if learner is not None:
            st.strategy = learner.strategy.copy()
        st.action = self._choose_action(i, from_node)
        st.cap = self._attempt_cap(i) if st.action == FORWARD else 0
        if (
            self.cfg.scheme == "enhanced_rtb"
            and st.action == DROP
            and learner is not None
        ):
            st.expected_cost = self._model_cost(i)

    def _targets(self, i: int) -> np.ndarray:
        if self.cfg.scheme == "gbbtc":
            assert self.tree_targets is not None
            return self.tree_targets[i]
        return self.nbrs[i]

    def run_stage(self, seq: int) -> tuple[np.ndarray, np.ndarray]:
        """Run one broadcast round; returns (handled flags, per-node attempts)."""
        n = self.topology.num_nodes
        src = self.cfg.source
        stage_state = [_NodeStage() for _ in range(n)]
        covered = np.zeros((n, n), dtype=bool)
        handled = np.zeros(n, dtype=bool)

        self._receive(src, seq, None, stage_state)
        handled[src] = True
        forwarders = {src} if stage_state[src].action == FORWARD else set()

        for slot in range(self.cfg.slots_per_stage):
            self._advance_channel(1)
            active = []
            for i in sorted(forwarders):
                st = stage_state[i]
                targets = self._targets(i)
                if st.attempts >= st.cap or (
                    len(targets) == 0 or covered[i, targets].all()
                ):
                    forwarders.discard(i)
                else:
                    active.append(i)
            if not active:
                self._advance_channel(self.cfg.slots_per_stage - slot - 1)
                break
            for i in active:
                st = stage_state[i]
                st.attempts += 1
                nbrs_i = self.nbrs[i]
                mask = ~covered[i, nbrs_i]
                uncov = nbrs_i[mask]
                probs = self.p_by_bin[self.states[self.out_links[i][mask]]]
                draws = self.rng.random(len(uncov))
                for j in uncov[draws < probs]:
                    # every neighbor of j overhears j's ACK, handled or not
                    covered[self.nbrs[j], j] = True
                    if not handled[j]:
                        self._receive(int(j), seq, i, stage_state)
                        handled[j] = True
                        if stage_state[j].action == FORWARD:
                            forwarders.add(int(j))
                    covered[j, i] = True

        attempts = np.array([stage_state[i].attempts for i in range(n)])
        for i in range(n):
            st = stage_state[i]
            if self.learners[i] is None or not st.handled:
                continue
            covered_count = int(covered[i, self.nbrs[i]].sum())
            utility = instantaneous_utility(
                st.action, covered_count, int(self.degrees[i]), st.attempts,
                self.cfg.alpha,
            )
            reward = covered_count / int(self.degrees[i])
            self.pending[i] = StageOutcome(
                action=st.action,
                utility=utility,
                reward=reward,
                expected_cost=st.expected_cost,
                strategy=st.strategy,
            )

        for tracker, members in zip(self.z_trackers, self.ensembles):
            joint = tuple(
                stage_state[p].action if stage_state[p].handled else DROP
                for p in members
            )
            eps = 1.0 / seq if self.params.decaying else None
            tracker.update(joint, epsilon=eps)

        return handled, attempts

    def _ensemble_violation(self, tracker: EmpiricalPlay) -> float:
        costs = [self._model_cost(i) for i in tracker.players]
        game = forwarding_stage_game(
            self.topology, tracker.players, costs, self.cfg.alpha
        )
        _, violation = ce_check(tracker.as_mapping(), game, tol=np.inf)
        return violation

    def run(self, num_stages: int, violation_stride: int = 0) -> SimulationResult:
        n = self.topology.num_nodes
        delivery = np.zeros(num_stages)
        total_tx = np.zeros(num_stages, dtype=np.int64)
        per_node = np.zeros((num_stages, n), dtype=np.int32)
        reached_arr = np.zeros(num_stages, dtype=np.int64)
        violations: list[tuple[int, int, float]] = []
        for stage in range(1, num_stages + 1):
            handled, attempts = self.run_stage(stage)
            reached = int(handled.sum()) - 1  # the source holds its own copy
            idx = stage - 1
            delivery[idx] = reached / (n - 1)
            total_tx[idx] = int(attempts.sum())
            per_node[idx] = attempts
            reached_arr[idx] = reached
            if violation_stride and stage % violation_stride == 0:
                for ens_id, tracker in enumerate(self.z_trackers):
                    violations.append(
                        (stage, ens_id, self._ensemble_violation(tracker))
                    )
        return SimulationResult(
            scheme=self.cfg.scheme,
            seed=self.seed,
            delivery_ratio=delivery,
            total_tx=total_tx,
            per_node_tx=per_node,
            reached=reached_arr,
            violations=violations,
        )
