"""Channel availability, reuse factor and coordinator energy."""

from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .engine import ContractError
from .spectrum import G, NUM_CHANNELS, ChannelId, ChannelSet


class ReuseDefinition(str, Enum):
    """How avgRF counts reuse in one superframe."""

    USES_PER_CHANNEL = "uses_per_channel"
    WBANS_PER_CHANNEL = "wbans_per_channel"


class EnergyModel(NamedTuple):
    """Coordinator energy constants (mW·slot per event, mW per idle slot).

    Defaults are a calibration that puts the BLE-assisted average power near
    0.46e-3 mW under heavy interference.
    """

    e_idle: float = 3.8e-4
    e_ble_rx: float = 2.0e-3
    e_scan: float = 1.5e-4
    e_cr: float = 1.0e-3
    scan_period_wo: int = 10


class MetricsParams(NamedTuple):
    reuse_definition: ReuseDefinition = ReuseDefinition.USES_PER_CHANNEL


class DeliveryCounters(NamedTuple):
    """Per-superframe packet fates: delivered + collided + carried_over == attempted."""

    attempted: int = 0
    delivered: int = 0
    collided: int = 0
    carried_over: int = 0

    def merged(self, other: "DeliveryCounters") -> "DeliveryCounters":
        return DeliveryCounters(*(a + b for a, b in zip(self, other)))


class ChannelUsage(NamedTuple):
    """Channel of every sensor transmission in one superframe, as a multiset."""

    n_wbans: int
    channels: tuple[ChannelId, ...]


class EnergyTally(NamedTuple):
    """Energy-relevant events counted at one coordinator.

    `mitigations` counts superframes whose FCS frame had interfering sensors
    to rescue, whether or not the CR was needed.
    """

    slots: int = 0
    alerts: int = 0
    cr_engagements: int = 0
    channels_scanned: int = 0
    mitigations: int = 0


class MetricsRecord(NamedTuple):
    superframe: int
    available: tuple[float, ...]
    usage: ChannelUsage
    energy_w: tuple[float, ...]
    energy_wo: tuple[float, ...]
    counters: DeliveryCounters


class RunSummary(NamedTuple):
    """Aggregates of one simulation run."""

    pr_avchs: float
    avg_reuse_factor: float
    avg_energy_w_mw: Optional[float]
    avg_energy_wo_mw: Optional[float]
    delivery_ratio: float
    collisions: int
    cr_engagements: int
    duplicates: int


def csim_availability(lch: ChannelSet) -> float:
    return len(G - lch) / NUM_CHANNELS


def ssa_availability(consumed: int) -> float:
    return max(0, NUM_CHANNELS - consumed) / NUM_CHANNELS


def pr_avchs(records: Sequence[MetricsRecord]) -> float:
    """Mean over superframes of the mean available-channel fraction over coordinators."""
    per_superframe = [float(np.mean(r.available)) for r in records if r.available]
    if not per_superframe:
        raise ContractError("pr_avchs needs at least one superframe with coordinators")
    return float(np.mean(per_superframe))


def reuse_factor(usage: ChannelUsage, definition: ReuseDefinition) -> Optional[float]:
    """Reuse in one superframe, or None when nothing is assigned."""
    if not usage.channels:
        return None
    distinct = len(set(usage.channels))
    if definition is ReuseDefinition.WBANS_PER_CHANNEL:
        return usage.n_wbans / distinct
    return len(usage.channels) / distinct


def avg_reuse_factor(
    usages: Sequence[ChannelUsage],
    definition: ReuseDefinition = ReuseDefinition.USES_PER_CHANNEL,
) -> float:
    """Average reuse over superframes that assigned at least one channel (0.0 if none did)."""
    values = [v for v in (reuse_factor(u, definition) for u in usages) if v is not None]
    return float(np.mean(values)) if values else 0.0


def coordinator_energy(tally: EnergyTally, model: EnergyModel, ble_enabled: bool) -> float:
    """Energy in mW·slot spent by one coordinator.

    With BLE the coordinator pays for each alert and scans only the LCH
    channels the CR actually sensed. Without BLE it has no LCH: it scans the
    whole band every `scan_period_wo` slots, and every mitigation needs a CR
    pass over the whole band.
    """
    energy = model.e_idle * tally.slots
    if ble_enabled:
        energy += (
            model.e_ble_rx * tally.alerts
            + model.e_cr * tally.cr_engagements
            + model.e_scan * tally.channels_scanned
        )
    else:
        full_scan = model.e_scan * NUM_CHANNELS
        energy += full_scan * (tally.slots // model.scan_period_wo) + (
            (model.e_cr + full_scan) * tally.mitigations
        )
    return energy


def avg_energy(tallies: Sequence[EnergyTally], model: EnergyModel, ble_enabled: bool) -> float:
    """Time-average coordinator power in mW, averaged over coordinators."""
    powers = [
        coordinator_energy(t, model, ble_enabled) / t.slots for t in tallies if t.slots > 0
    ]
    if not powers:
        raise ContractError("avg_energy needs at least one coordinator with elapsed slots")
    return float(np.mean(powers))


def summarize(
    records: Sequence[MetricsRecord],
    tallies: Optional[Sequence[EnergyTally]],
    energy: EnergyModel,
    reuse_definition: ReuseDefinition,
    duplicates: int,
) -> RunSummary:
    """Fold per-superframe records into a RunSummary; tallies are None for SSA."""
    counters = DeliveryCounters()
    for record in records:
        counters = counters.merged(record.counters)
    return RunSummary(
        pr_avchs=pr_avchs(records),
        avg_reuse_factor=avg_reuse_factor([r.usage for r in records], reuse_definition),
        avg_energy_w_mw=avg_energy(tallies, energy, True) if tallies else None,
        avg_energy_wo_mw=avg_energy(tallies, energy, False) if tallies else None,
        delivery_ratio=counters.delivered / counters.attempted if counters.attempted else 1.0,
        collisions=counters.collided,
        cr_engagements=sum(t.cr_engagements for t in tallies) if tallies else 0,
        duplicates=duplicates,
    )
