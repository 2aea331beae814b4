"""Discounted empirical joint play and correlated-equilibrium membership.

The empirical-play tracker holds a discounted frequency distribution over
the joint actions of a small player ensemble (binary actions each, at most
a dozen players, so the support never exceeds 2**12 profiles).  The CE
check evaluates, for a finite game, every unilateral-swap inequality of a
candidate distribution and reports the largest violation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Sequence

import numpy as np

MAX_ENSEMBLE_PLAYERS = 12


class EmpiricalPlay:
    """Discounted distribution over joint binary actions of an ensemble.

    Starts uniform over the 2**p joint profiles unless an initial
    distribution is supplied; every update keeps the masses normalized.
    """

    def __init__(
        self,
        players: Sequence[int],
        epsilon: float,
        initial: Mapping[tuple[int, ...], float] | None = None,
    ) -> None:
        self.players = tuple(players)
        if len(self.players) > MAX_ENSEMBLE_PLAYERS:
            raise ValueError(
                f"ensemble of {len(self.players)} players exceeds "
                f"{MAX_ENSEMBLE_PLAYERS}"
            )
        if not 0.0 < epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
        self.epsilon = epsilon
        size = 2 ** len(self.players)
        if initial is None:
            self.masses = np.full(size, 1.0 / size)
        else:
            self.masses = np.zeros(size)
            for profile, mass in initial.items():
                self.masses[self._index(profile)] = mass
            if abs(self.masses.sum() - 1.0) > 1e-9 or np.any(self.masses < 0):
                raise ValueError("initial masses must form a distribution")

    def _index(self, profile: Sequence[int]) -> int:
        if len(profile) != len(self.players) or any(
            a not in (0, 1) for a in profile
        ):
            raise IndexError(f"profile {tuple(profile)} outside the joint action space")
        idx = 0
        for a in profile:
            idx = (idx << 1) | int(a)
        return idx

    def update(self, joint_action: Sequence[int], epsilon: float | None = None) -> None:
        """Decay every mass by (1 - eps) and add eps to the played profile."""
        idx = self._index(joint_action)
        eps = self.epsilon if epsilon is None else epsilon
        self.masses *= 1.0 - eps
        self.masses[idx] += eps

    def as_mapping(self) -> dict[tuple[int, ...], float]:
        p = len(self.players)
        return {
            tuple((idx >> (p - 1 - bit)) & 1 for bit in range(p)): float(mass)
            for idx, mass in enumerate(self.masses)
        }

    def total_mass(self) -> float:
        return float(self.masses.sum())


@dataclass(frozen=True)
class FiniteGame:
    """Utility tables of a finite normal-form game.

    utilities[i] is an array of shape action_counts giving player i's payoff
    at every joint action.
    """

    action_counts: tuple[int, ...]
    utilities: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.utilities) != len(self.action_counts):
            raise ValueError("one utility tensor per player required")
        for u in self.utilities:
            if u.shape != self.action_counts:
                raise ValueError("utility tensor shape mismatch")
            if not np.all(np.isfinite(u)):
                raise ValueError("utilities must be finite")

    @property
    def num_players(self) -> int:
        return len(self.action_counts)

    def joint_actions(self):
        return product(*(range(c) for c in self.action_counts))


def chicken_game() -> FiniteGame:
    """Two-player anti-coordination fixture (action 0 = dare, 1 = yield)."""
    u0 = np.array([[0.0, 7.0], [2.0, 6.0]])
    return FiniteGame(action_counts=(2, 2), utilities=(u0, u0.T.copy()))


def ce_check(
    distribution: Mapping[tuple[int, ...], float],
    game: FiniteGame,
    tol: float,
) -> tuple[bool, float]:
    """Test correlated-equilibrium membership of a joint distribution.

    For every player i and ordered action pair a != b, computes the expected
    gain of swapping recommendation a for b; membership holds when every such
    gain is at most tol.  Returns (is_ce, max_gain).
    """
    if tol < 0.0:
        raise ValueError("tol must be nonnegative")
    total = sum(distribution.values())
    if abs(total - 1.0) > 1e-6 or any(m < -1e-12 for m in distribution.values()):
        raise ValueError("distribution is not normalized")
    max_gain = -np.inf
    for i in range(game.num_players):
        u = game.utilities[i]
        for a in range(game.action_counts[i]):
            marginal = [
                (profile, mass)
                for profile, mass in distribution.items()
                if profile[i] == a and mass != 0.0
            ]
            for b in range(game.action_counts[i]):
                if b == a:
                    continue
                gain = 0.0
                for profile, mass in marginal:
                    swapped = profile[:i] + (b,) + profile[i + 1 :]
                    gain += mass * (u[swapped] - u[profile])
                max_gain = max(max_gain, gain)
    return bool(max_gain <= tol), float(max_gain)


def ce_violation_series(
    trace: Sequence[Mapping[tuple[int, ...], float]],
    game: FiniteGame,
    stride: int = 1,
) -> list[tuple[int, float]]:
    """Max CE violation of sampled snapshots of an empirical-play trace."""
    if not trace:
        raise ValueError("trace must be nonempty")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    out = []
    for idx in range(0, len(trace), stride):
        _, violation = ce_check(trace[idx], game, tol=np.inf)
        out.append((idx, violation))
    if out[-1][0] != len(trace) - 1:
        _, violation = ce_check(trace[-1], game, tol=np.inf)
        out.append((len(trace) - 1, violation))
    return out
