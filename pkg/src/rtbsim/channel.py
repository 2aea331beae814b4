"""Finite-state Markov model of slow Rayleigh fading links.

Each directed link is discretized into SNR bins; the occupied bin evolves
as a circulant birth-death Markov chain (stay with probability 1 - 2*sigma,
hop to either circularly adjacent bin with probability sigma).  All SNR
values are linear; dB enters only through the conversion helpers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DegenerateBinError(ValueError):
    """A bin with zero probability mass cannot be conditioned on."""


class UnreachableNeighborError(ValueError):
    """Zero success probability makes the expected attempt count diverge."""


class NoFiniteQuantileError(ValueError):
    """No finite attempt count can reach the requested coverage probability."""


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def make_equal_probability_bins(num_bins: int, mean_snr: float) -> tuple[float, ...]:
    """Bin thresholds putting exponential mass exactly 1/K in every bin.

    Returns K+1 ascending thresholds, first 0, last +inf (linear SNR).
    """
    if num_bins < 1:
        raise ValueError(f"num_bins must be >= 1, got {num_bins}")
    if mean_snr <= 0:
        raise ValueError(f"mean_snr must be positive, got {mean_snr}")
    # inverse CDF of g(x) = exp(-x/mean)/mean at k/K
    thresholds = [-mean_snr * math.log1p(-k / num_bins) for k in range(num_bins)]
    thresholds.append(math.inf)
    return tuple(thresholds)


def _exp_cdf_tail(x: float, mean: float) -> float:
    return 0.0 if math.isinf(x) else math.exp(-x / mean)


def _bin_mass(lo: float, hi: float, mean: float) -> float:
    return _exp_cdf_tail(lo, mean) - _exp_cdf_tail(hi, mean)


def _bin_mean_snr(lo: float, hi: float, mean: float) -> float:
    # integral of x*g(x) over [lo, hi) in closed form
    upper = 0.0 if math.isinf(hi) else (hi + mean) * math.exp(-hi / mean)
    numer = (lo + mean) * math.exp(-lo / mean) - upper
    mass = _bin_mass(lo, hi, mean)
    if mass <= 0.0:
        raise DegenerateBinError(f"bin [{lo}, {hi}) has zero mass")
    return numer / mass


def _bin_ber(lo: float, hi: float, mean: float) -> float:
    # BPSK approximation 0.2*exp(-1.6*snr) averaged over the bin
    c = 1.6 + 1.0 / mean
    mass = _bin_mass(lo, hi, mean)
    if mass <= 0.0:
        raise DegenerateBinError(f"bin [{lo}, {hi}) has zero mass")
    upper = 0.0 if math.isinf(hi) else math.exp(-c * hi)
    return 0.2 * (math.exp(-c * lo) - upper) / (mean * c * mass)


@dataclass(frozen=True)
class FadingProfile:
    """Per-link channel table: thresholds, quantized SNRs and BERs per bin."""

    mean_snr: float
    num_bins: int
    thresholds: tuple[float, ...]
    sigma: float
    quantized_snr: tuple[float, ...]
    state_ber: tuple[float, ...]

    def __post_init__(self) -> None:
        k = self.num_bins
        if k < 1:
            raise ValueError("num_bins must be >= 1")
        if self.mean_snr <= 0:
            raise ValueError("mean_snr must be positive")
        if not 0.0 <= self.sigma <= 0.5:
            raise ValueError(f"sigma must lie in [0, 1/2], got {self.sigma}")
        if len(self.thresholds) != k + 1:
            raise ValueError("need num_bins + 1 thresholds")
        if self.thresholds[0] != 0.0 or not math.isinf(self.thresholds[-1]):
            raise ValueError("thresholds must start at 0 and end at +inf")
        if any(a >= b for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("thresholds must be strictly increasing")
        if len(self.quantized_snr) != k or len(self.state_ber) != k:
            raise ValueError("need one quantized SNR and BER per bin")
        total = sum(self.bin_probability(i) for i in range(1, k + 1))
        if abs(total - 1.0) > 1e-12:
            raise ValueError("steady-state bin probabilities must sum to 1")
        for i in range(k):
            if not self.thresholds[i] <= self.quantized_snr[i] < self.thresholds[i + 1]:
                raise ValueError(f"quantized SNR of bin {i + 1} outside its bin")
        if any(b < 0.0 or b > 0.2 for b in self.state_ber):
            raise ValueError("per-state BER must lie in [0, 0.2]")
        # strictly decreasing except where the closed form underflows to 0
        if any(
            a <= b and not (a == 0.0 and b == 0.0)
            for a, b in zip(self.state_ber, self.state_ber[1:])
        ):
            raise ValueError("per-state BER must be decreasing")

    def bin_probability(self, k: int) -> float:
        """Steady-state probability of bin k (1-based)."""
        if not 1 <= k <= self.num_bins:
            raise IndexError(f"bin index {k} out of range 1..{self.num_bins}")
        return _bin_mass(self.thresholds[k - 1], self.thresholds[k], self.mean_snr)


def rayleigh_profile(num_bins: int, mean_snr: float, sigma: float) -> FadingProfile:
    """Equal-probability-bin profile for an exponential SNR density."""
    thresholds = make_equal_probability_bins(num_bins, mean_snr)
    quantized = tuple(
        _bin_mean_snr(thresholds[i], thresholds[i + 1], mean_snr)
        for i in range(num_bins)
    )
    bers = tuple(
        _bin_ber(thresholds[i], thresholds[i + 1], mean_snr) for i in range(num_bins)
    )
    return FadingProfile(
        mean_snr=mean_snr,
        num_bins=num_bins,
        thresholds=thresholds,
        sigma=sigma,
        quantized_snr=quantized,
        state_ber=bers,
    )


def steady_state_probability(profile: FadingProfile, k: int) -> float:
    return profile.bin_probability(k)


def quantized_snr(profile: FadingProfile, k: int) -> float:
    if not 1 <= k <= profile.num_bins:
        raise IndexError(f"bin index {k} out of range 1..{profile.num_bins}")
    return profile.quantized_snr[k - 1]


def ber_for_state(profile: FadingProfile, k: int) -> float:
    if not 1 <= k <= profile.num_bins:
        raise IndexError(f"bin index {k} out of range 1..{profile.num_bins}")
    return profile.state_ber[k - 1]


@dataclass
class FsmcLink:
    """Mutable bin occupancy of one directed link."""

    profile: FadingProfile
    state: int = 1

    def __post_init__(self) -> None:
        if not 1 <= self.state <= self.profile.num_bins:
            raise ValueError(f"state {self.state} outside 1..{self.profile.num_bins}")


def transition_step(link: FsmcLink, rng: np.random.Generator) -> int:
    """Advance the link one packet slot; returns the new bin index.

    The chain wraps circularly between bin 1 and bin K.  The single draw u
    maps u < sigma to the lower neighbor and sigma <= u < 2*sigma to the
    upper one, matching the vectorized update in the simulator.
    """
    sigma = link.profile.sigma
    if sigma > 0.5:
        raise ValueError(f"sigma must be <= 1/2, got {sigma}")
    k = link.profile.num_bins
    if k > 1:
        u = rng.random()
        if u < sigma:
            link.state = (link.state - 2) % k + 1
        elif u < 2.0 * sigma:
            link.state = link.state % k + 1
    return link.state


def transition_matrix(profile: FadingProfile) -> np.ndarray:
    """The full K x K circulant transition matrix (rows sum to 1)."""
    k = profile.num_bins
    p = np.zeros((k, k))
    if k == 1:
        p[0, 0] = 1.0
        return p
    rho = 1.0 - 2.0 * profile.sigma
    for i in range(k):
        p[i, i] = rho
        p[i, (i - 1) % k] += profile.sigma
        p[i, (i + 1) % k] += profile.sigma
    return p


def packet_success_probability(ber: float, l_bits: int) -> float:
    """Probability that an L-bit packet survives a link with the given BER."""
    if not 0.0 <= ber <= 1.0:
        raise ValueError(f"ber must lie in [0, 1], got {ber}")
    if l_bits < 1:
        raise ValueError(f"l_bits must be >= 1, got {l_bits}")
    return (1.0 - ber) ** l_bits


def expected_retransmissions(success_probs: Sequence[float]) -> float:
    """Expected attempts to cover every neighbor: 1 + sum_j (1-p_j)/p_j."""
    total = 1.0
    for p in success_probs:
        if p <= 0.0:
            raise UnreachableNeighborError("neighbor with zero success probability")
        if p > 1.0:
            raise ValueError(f"success probability {p} above 1")
        total += (1.0 - p) / p
    return total


def coverage_cdf(success_probs: Sequence[float], c: int) -> float:
    """P(all neighbors covered within c independent attempts)."""
    out = 1.0
    for p in success_probs:
        out *= 1.0 - (1.0 - p) ** c
    return out


def semi_reliable_quantile(success_probs: Sequence[float], delta: float) -> int:
    """Smallest attempt count c with coverage_cdf(c) >= delta."""
    for p in success_probs:
        if p <= 0.0:
            raise UnreachableNeighborError("neighbor with zero success probability")
        if p > 1.0:
            raise ValueError(f"success probability {p} above 1")
    if not 0.0 < delta < 1.0:
        if delta >= 1.0 and any(p < 1.0 for p in success_probs):
            raise NoFiniteQuantileError("delta >= 1 with an imperfect link")
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    c = 1
    while coverage_cdf(success_probs, c) < delta:
        c += 1
    return c


def channel_table_rows(profile: FadingProfile) -> list[dict]:
    """Per-bin summary rows for the channel profile CSV dump."""
    rows = []
    for k in range(1, profile.num_bins + 1):
        lo = profile.thresholds[k - 1]
        hi = profile.thresholds[k]
        rows.append(
            {
                "bin": k,
                "gamma_low_db": linear_to_db(lo) if lo > 0 else -math.inf,
                "gamma_high_db": linear_to_db(hi) if not math.isinf(hi) else math.inf,
                "v_k": profile.bin_probability(k),
                "gamma_bar_db": linear_to_db(profile.quantized_snr[k - 1]),
                "ber": profile.state_ber[k - 1],
            }
        )
    return rows
