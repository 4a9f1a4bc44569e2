"""Channel-set algebra and the cognitive-radio usability/stability checks.

Channel index i is IEEE 802.15.4 channel 11 + i (2405 + 5·i MHz).
"""

import math
import operator
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Iterator, NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate

from .engine import ContractError

NUM_CHANNELS = 16
ZIGBEE_BANDWIDTH_HZ = 2e6
QUAD_RTOL = 1e-8

ChannelId = int


def check_channel(channel: int) -> ChannelId:
    """Validate a channel index and return it as a plain int."""
    index = operator.index(channel)
    if not 0 <= index < NUM_CHANNELS:
        raise ContractError(f"channel index must be in [0, {NUM_CHANNELS - 1}], got {channel}")
    return index


@dataclass(frozen=True)
class ChannelSet:
    """Immutable subset of the 16 ZigBee channels, stored as a bitmask."""

    mask: int = 0

    def __post_init__(self):
        if not 0 <= self.mask < (1 << NUM_CHANNELS):
            raise ContractError(f"channel mask out of range: {self.mask:#x}")

    @classmethod
    def of(cls, channels: Iterable[int]) -> "ChannelSet":
        mask = 0
        for channel in channels:
            mask |= 1 << check_channel(channel)
        return cls(mask)

    @classmethod
    def full(cls) -> "ChannelSet":
        return cls((1 << NUM_CHANNELS) - 1)

    def __contains__(self, channel: object) -> bool:
        try:
            index = operator.index(channel)
        except TypeError:
            return False
        return 0 <= index < NUM_CHANNELS and bool(self.mask >> index & 1)

    def __iter__(self) -> Iterator[ChannelId]:
        return (c for c in range(NUM_CHANNELS) if self.mask >> c & 1)

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __bool__(self) -> bool:
        return self.mask != 0

    def __or__(self, other: "ChannelSet") -> "ChannelSet":
        return ChannelSet(self.mask | other.mask)

    def __and__(self, other: "ChannelSet") -> "ChannelSet":
        return ChannelSet(self.mask & other.mask)

    def __sub__(self, other: "ChannelSet") -> "ChannelSet":
        return ChannelSet(self.mask & ~other.mask)

    def complement(self) -> "ChannelSet":
        return G - self

    def add(self, channel: ChannelId) -> "ChannelSet":
        return ChannelSet(self.mask | 1 << check_channel(channel))

    def discard(self, channel: ChannelId) -> "ChannelSet":
        return ChannelSet(self.mask & ~(1 << check_channel(channel)))

    def __repr__(self) -> str:
        return f"ChannelSet({{{', '.join(str(c) for c in self)}}})"


G = ChannelSet.full()
EMPTY = ChannelSet()


class NoiseModel(NamedTuple):
    """Parameters of the noise-power indicator and its three regions.

    The thresholds are in normalized noise-power units; `scales[c]` multiplies
    the mean noise power on channel c.
    """

    u: int = 5
    lambda1: float = 1.5
    lambda2: float = 3.0
    scales: tuple[float, ...] = (1.0,) * NUM_CHANNELS

    @property
    def lambda0(self) -> float:
        return 0.0

    @property
    def lambda3(self) -> float:
        return math.inf

    @property
    def thresholds(self) -> tuple[float, float, float, float]:
        return (0.0, self.lambda1, self.lambda2, math.inf)

    def scale(self, channel: ChannelId) -> float:
        return self.scales[check_channel(channel)]

    def with_scale(self, channel: ChannelId, scale: float) -> "NoiseModel":
        """Return a copy with one channel's noise scale replaced."""
        if scale <= 0:
            raise ContractError(f"noise scale must be positive, got {scale}")
        scales = list(self.scales)
        scales[check_channel(channel)] = float(scale)
        return self._replace(scales=tuple(scales))

    def with_scales(self, scales: Sequence[float]) -> "NoiseModel":
        """Return a copy with every channel's noise scale replaced."""
        if len(scales) != NUM_CHANNELS or any(s <= 0 for s in scales):
            raise ContractError("need one positive noise scale per channel")
        return self._replace(scales=tuple(float(s) for s in scales))

    def check(self) -> "NoiseModel":
        """Raise ContractError unless 0 < λ1 < λ2 and u is a positive integer."""
        if not isinstance(self.u, int) or self.u < 1:
            raise ContractError(f"u must be a positive integer, got {self.u!r}")
        if not 0 < self.lambda1 < self.lambda2 < math.inf:
            raise ContractError(
                f"need 0 < lambda1 < lambda2, got lambda1={self.lambda1}, lambda2={self.lambda2}"
            )
        if len(self.scales) != NUM_CHANNELS or any(s <= 0 for s in self.scales):
            raise ContractError("need one positive noise scale per channel")
        return self


class Verdict(Enum):
    USABLE = "usable"
    USABLE_WITH_BOOST = "usable-with-boost"
    UNUSABLE = "unusable"


class ChannelVerdict(NamedTuple):
    """Classification of one sensed channel."""

    verdict: Verdict
    indicator: float
    capacity_bps: Optional[float] = None

    @property
    def usable(self) -> bool:
        return self.verdict is not Verdict.UNUSABLE


class SelectionResult(NamedTuple):
    """Outcome of a sequential CR scan: the chosen channel (or None) and what was sensed."""

    channel: Optional[ChannelId]
    sensed: tuple[ChannelId, ...]


def noise_power_indicator(samples: Sequence[float], u: int) -> float:
    """Mean squared value of 2u noise samples."""
    values = np.asarray(samples, dtype=float)
    if u < 1 or values.shape != (2 * u,):
        raise ContractError(f"expected exactly {2 * u} samples, got shape {values.shape}")
    return float(np.dot(values, values) / (2 * u))


def noise_pdf(y: float, u: int) -> float:
    """Density of the noise-power indicator: Gamma with shape u and rate u."""
    if y < 0:
        raise ContractError(f"noise_pdf is defined for y >= 0, got {y}")
    if u < 1:
        raise ContractError(f"u must be >= 1, got {u}")
    if y == 0:
        return 1.0 if u == 1 else 0.0
    log_density = (
        u * math.log(u)
        - math.log(math.factorial(u - 1))
        + (u - 1) * math.log(y)
        - u * y
    )
    return math.exp(log_density)


def shannon_capacity(bandwidth_hz: float, snr_linear: float) -> float:
    """Maximum rate B·log2(1 + SNR) in bits per second."""
    if bandwidth_hz <= 0:
        raise ContractError(f"bandwidth must be positive, got {bandwidth_hz}")
    if snr_linear < 0:
        raise ContractError(f"SNR must be a non-negative linear ratio, got {snr_linear}")
    return bandwidth_hz * math.log2(1.0 + snr_linear)


def classify_channel(
    y: float, model: NoiseModel, snr_linear: Optional[float] = None
) -> ChannelVerdict:
    """Classify a measured indicator into usable / usable-with-boost / unusable.

    Regions are right-open: [0, λ1), [λ1, λ2), [λ2, ∞).

    Parameters
    ----------
    y : float
        Measured noise-power indicator.
    model : NoiseModel
        Supplies λ1 and λ2.
    snr_linear : float, optional
        Link SNR for the capacity estimate of a boosted channel. Defaults to 1/y.
    """
    if y < 0:
        raise ContractError(f"noise indicator must be >= 0, got {y}")
    if y < model.lambda1:
        return ChannelVerdict(Verdict.USABLE, y)
    if y < model.lambda2:
        snr = snr_linear if snr_linear is not None else 1.0 / y
        return ChannelVerdict(
            Verdict.USABLE_WITH_BOOST, y, shannon_capacity(ZIGBEE_BANDWIDTH_HZ, snr)
        )
    return ChannelVerdict(Verdict.UNUSABLE, y)


def _gamma_mass(lower: float, upper: float, u: int) -> float:
    if lower >= upper:
        return 0.0
    if u == 1:
        return math.exp(-lower) - math.exp(-upper)
    mass, _ = integrate.quad(noise_pdf, lower, upper, args=(u,), epsabs=1e-12, epsrel=QUAD_RTOL)
    return mass


def region_probability(j: int, model: NoiseModel, scale: float = 1.0) -> float:
    """Probability that the indicator falls in region j (1, 2 or 3).

    Under a noise scale s the region bounds become λ/s.
    """
    if j not in (1, 2, 3):
        raise ContractError(f"region index must be 1, 2 or 3, got {j}")
    if scale <= 0:
        raise ContractError(f"noise scale must be positive, got {scale}")
    model.check()
    bounds = model.thresholds
    return _gamma_mass(bounds[j - 1] / scale, bounds[j] / scale, model.u)


def is_stable(channel: ChannelId, model: NoiseModel, stability_threshold: float) -> bool:
    """True when the channel stays in a usable region with probability >= threshold."""
    scale = model.scale(channel)
    usable_mass = region_probability(1, model, scale) + region_probability(2, model, scale)
    return usable_mass >= stability_threshold


def compute_us(g: ChannelSet, lch: ChannelSet, default_channel: ChannelId) -> ChannelSet:
    """Unused channels: G − (LCH ∪ {default})."""
    if default_channel not in g:
        raise ContractError(f"default channel {default_channel} is not in {g!r}")
    return g - lch.add(default_channel)


def sense_channel(
    channel: ChannelId, model: NoiseModel, rng: np.random.Generator
) -> ChannelVerdict:
    """Draw 2u noise samples for `channel` at its current scale and classify them."""
    samples = rng.standard_normal(2 * model.u) * math.sqrt(model.scale(channel))
    return classify_channel(noise_power_indicator(samples, model.u), model)


def select_stable_channel(
    candidates: Sequence[ChannelId],
    model: NoiseModel,
    stability_threshold: float,
    sense: Callable[[ChannelId], ChannelVerdict],
) -> SelectionResult:
    """Sense candidates in order until one is usable and stable.

    Parameters
    ----------
    candidates : sequence of int
        Channels to scan, in scan order.
    model : NoiseModel
        Noise model (with per-channel scales) used by the stability test.
    stability_threshold : float
        Minimum probability of staying usable.
    sense : callable
        Measures one channel and returns its verdict.

    Returns
    -------
    SelectionResult
        The first usable and stable channel, or None when the scan is
        exhausted, together with every channel that was sensed.
    """
    if not candidates:
        raise ContractError("select_stable_channel needs at least one candidate")

    sensed: list[ChannelId] = []
    for channel in candidates:
        verdict = sense(channel)
        sensed.append(channel)
        if verdict.usable and is_stable(channel, model, stability_threshold):
            return SelectionResult(channel, tuple(sensed))
    return SelectionResult(None, tuple(sensed))
