"""Per-player regret learning core for the binary forwarding game.

A learner keeps discounted averages of realized utilities, an estimate of
what the unplayed action would have earned, nonnegative regret values for
both ordered action pairs, and a mixed strategy with an exploration floor.
Two estimation modes exist: "proxy" (importance-weighted reuse of stages
where the other action was actually played) and "csi" (the forwarding cost
replaced by a per-stage model value computed from channel state).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

DROP = 0
FORWARD = 1


@dataclass(frozen=True)
class LearnerParams:
    epsilon: float = 0.1
    decaying: bool = False  # step 1/n instead of constant epsilon
    delta_explore: float = 0.05
    mu: float = 1.0
    alpha: float = 0.1
    num_actions: int = 2

    def __post_init__(self) -> None:
        if not self.decaying and not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not 0.0 <= self.delta_explore < 1.0:
            raise ValueError(f"delta_explore must lie in [0, 1), got {self.delta_explore}")
        if self.mu <= 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if self.num_actions != 2:
            raise ValueError("only the binary action set is supported")


def effective_step(stage: int, params: LearnerParams) -> float:
    """Step size at a 1-based stage index: constant or 1/n."""
    if stage < 1:
        raise IndexError(f"stage index must be >= 1, got {stage}")
    return 1.0 / stage if params.decaying else params.epsilon


def discounted_actual_average(
    history: Iterable[tuple[int, int, float]], action: int, epsilon: float
) -> float:
    """Explicit discounted sum of utilities over stages where `action` was played.

    History entries are (stage, action, utility) with the last entry at stage n.
    Kept as a direct (non-recursive) evaluation for cross-checking the learner.
    """
    entries = list(history)
    if not entries:
        return 0.0
    n = entries[-1][0]
    return sum(
        epsilon * (1.0 - epsilon) ** (n - eta) * u
        for eta, a, u in entries
        if a == action
    )


def proxy_potential_average(
    history: Iterable[tuple[int, int, float]],
    action: int,
    epsilon: float,
    strategy_trace: Sequence[Sequence[float]],
) -> float:
    """Importance-weighted estimate of the average utility of `action`.

    Sums over stages where `action` itself was played, each term weighted by
    sigma(other)/sigma(action) at that stage.  `strategy_trace[eta - 1]` is
    the mixed strategy in force at stage eta.
    """
    entries = list(history)
    if not entries:
        return 0.0
    n = entries[-1][0]
    total = 0.0
    for eta, a, u in entries:
        if a != action:
            continue
        sigma = strategy_trace[eta - 1]
        if sigma[action] <= 0.0:
            raise ZeroDivisionError("played action had zero probability in the trace")
        total += (
            epsilon
            * (1.0 - epsilon) ** (n - eta)
            * (sigma[1 - action] / sigma[action])
            * u
        )
    return total


def csi_potential_average(
    history: Iterable[tuple[int, int, float, float]],
    epsilon: float,
    strategy_trace: Sequence[Sequence[float]],
    alpha: float,
) -> float:
    """Model-based estimate of the forwarding action's average utility.

    History entries are (stage, action, reward, expected_cost): on forward
    stages the reward is importance-weighted as in the proxy estimate; on
    drop stages the scaled model cost recorded at that stage is subtracted.
    """
    entries = list(history)
    if not entries:
        return 0.0
    n = entries[-1][0]
    total = 0.0
    for eta, a, reward, cbar in entries:
        w = epsilon * (1.0 - epsilon) ** (n - eta)
        if a == FORWARD:
            sigma = strategy_trace[eta - 1]
            if sigma[FORWARD] <= 0.0:
                raise ZeroDivisionError("forward had zero probability in the trace")
            total += w * (sigma[DROP] / sigma[FORWARD]) * reward
        else:
            total -= w * alpha * cbar
    return total


def regret_update_recursive(
    q_prev: float,
    a: int,
    b: int,
    utility: float,
    played: int,
    strategy: Sequence[float],
    epsilon: float,
) -> float:
    """One-step recursive regret update for the ordered pair (a, b)."""
    if a == b:
        raise ValueError("regret is defined for distinct actions only")
    inner = 0.0
    if played == b:
        if strategy[b] <= 0.0:
            raise ZeroDivisionError("played action has zero probability")
        inner = (strategy[a] / strategy[b]) * utility
    elif played == a:
        inner = -utility
    inner = max(inner, 0.0)
    return q_prev + epsilon * (inner - q_prev)


def strategy_from_regret(
    q_switch: float, played: int, params: LearnerParams
) -> np.ndarray:
    """Next mixed strategy given the regret of switching away from `played`."""
    if params.mu <= 0.0:
        raise ValueError("mu must be positive")
    half = 1.0 / params.num_actions
    delta = params.delta_explore
    p_switch = (1.0 - delta) * min(q_switch / params.mu, half) + delta * half
    out = np.empty(2)
    out[1 - played] = p_switch
    out[played] = 1.0 - p_switch
    return out


def sample_action(strategy: Sequence[float], rng: np.random.Generator) -> int:
    """Draw an action index from a mixed strategy."""
    sigma = np.asarray(strategy, dtype=float)
    if sigma.ndim != 1 or np.any(sigma < 0) or abs(sigma.sum() - 1.0) > 1e-9:
        raise ValueError(f"invalid distribution {strategy}")
    u = rng.random()
    return int(u >= sigma[0]) if len(sigma) == 2 else int(np.searchsorted(np.cumsum(sigma), u))


@dataclass
class StageOutcome:
    """What a learner observed for one completed stage."""

    action: int
    utility: float
    reward: float  # coverage fraction, the cost-free part of the utility
    expected_cost: Optional[float] = None  # model cost at a drop stage (csi mode)
    strategy: Optional[Sequence[float]] = None  # strategy in force when acting
    counterfactual: Optional[float] = None  # exact utility of the unplayed action
    # (full-monitoring mode: matrix games where the joint action is observed)


class RegretLearner:
    """Regret tracker for one node.

    The discounted actual and potential averages are maintained recursively
    (decay-then-add); each stage the regrets are the clamped differences of
    those averages.  mode "proxy" estimates the unplayed action's average by
    importance weighting alone; mode "csi" replaces the forwarding estimate
    by a decomposed reward term minus a model-based cost term; mode "full"
    consumes an exact per-stage counterfactual utility (full monitoring, for
    matrix games where the joint action is observable).
    """

    def __init__(self, params: LearnerParams, mode: str = "proxy") -> None:
        if mode not in ("proxy", "csi", "full"):
            raise ValueError(f"unknown estimation mode {mode!r}")
        self.params = params
        self.mode = mode
        self.stage = 0
        self.strategy = np.array([0.5, 0.5])
        self.regrets = {(DROP, FORWARD): 0.0, (FORWARD, DROP): 0.0}
        self.actual_avg = np.zeros(2)  # discounted realized utility per action
        self.potential_avg = np.zeros(2)  # proxy estimate per action
        self._reward_term = 0.0  # forward-stage importance-weighted rewards
        self._cost_term = 0.0  # drop-stage scaled model costs
        self.last_action: Optional[int] = None

    def act(self, rng: np.random.Generator) -> int:
        self.last_action = sample_action(self.strategy, rng)
        return self.last_action

    def observe(self, outcome: StageOutcome) -> None:
        """Fold one completed stage into the averages, regrets and strategy."""
        self.stage += 1
        eps = effective_step(self.stage, self.params)
        a = outcome.action
        u = outcome.utility
        sigma = np.asarray(
            self.strategy if outcome.strategy is None else outcome.strategy, dtype=float
        )
        if sigma[a] <= 0.0:
            raise ZeroDivisionError("played action has zero probability")
        ratio = sigma[1 - a] / sigma[a]

        if self.mode == "csi":
            self._reward_term *= 1.0 - eps
            self._cost_term *= 1.0 - eps
            if a == FORWARD:
                self._reward_term += eps * ratio * outcome.reward
            else:
                if outcome.expected_cost is None:
                    raise ValueError("csi mode needs expected_cost on drop stages")
                self._cost_term += eps * self.params.alpha * outcome.expected_cost

        self.actual_avg *= 1.0 - eps
        self.potential_avg *= 1.0 - eps
        self.actual_avg[a] += eps * u
        if self.mode == "full":
            # exact counterfactual for the unplayed action, same stage
            if outcome.counterfactual is None:
                raise ValueError("full mode needs the counterfactual utility")
            self.potential_avg[1 - a] += eps * outcome.counterfactual
        else:
            self.potential_avg[a] += eps * ratio * u

        forward_est = (
            self._reward_term - self._cost_term
            if self.mode == "csi"
            else self.potential_avg[FORWARD]
        )
        self.regrets[(DROP, FORWARD)] = max(forward_est - self.actual_avg[DROP], 0.0)
        self.regrets[(FORWARD, DROP)] = max(
            self.potential_avg[DROP] - self.actual_avg[FORWARD], 0.0
        )

        self.strategy = strategy_from_regret(
            self.regrets[(a, 1 - a)], a, self.params
        )
