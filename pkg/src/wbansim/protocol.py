"""CSIM state machines over the beacon / TDMA / FCS / FBTDMA superframe."""

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple, Optional

import numpy as np

from .engine import STREAM_COORDINATOR, ContractError, make_rng
from .spectrum import (
    G,
    NUM_CHANNELS,
    ChannelId,
    ChannelSet,
    ChannelVerdict,
    NoiseModel,
    compute_us,
    select_stable_channel,
)
from .world import Link, Outcome, SlotAir


class ProtocolParams(NamedTuple):
    """Superframe sizing and CR decision knobs."""

    fcs_length: int = 2
    inactive_length: int = 20
    stability_threshold: float = 0.9
    occupancy_gain: float = 2.0
    ble_period: int = 1


class SuperframeLayout(NamedTuple):
    """Tick offsets of each frame inside one superframe.

    beacon (1) · TDMA (K) · FCS (fcs_length) · backup region (K) · inactive.
    Only |LIS| slots of the backup region are used; the rest is idle.
    """

    k_sensors: int
    fcs_length: int = 2
    inactive_length: int = 20

    @property
    def tdma_start(self) -> int:
        return 1

    @property
    def fcs_start(self) -> int:
        return 1 + self.k_sensors

    @property
    def beacon_offset(self) -> int:
        """Tick of the short FCS beacon (last FCS slot)."""
        return self.fcs_start + self.fcs_length - 1

    @property
    def backup_start(self) -> int:
        return self.fcs_start + self.fcs_length

    @property
    def active_ticks(self) -> int:
        return self.backup_start + self.k_sensors

    @property
    def period(self) -> int:
        return self.active_ticks + self.inactive_length

    def origin(self, superframe: int) -> int:
        return superframe * self.period


class SensorRef(NamedTuple):
    wban: int
    index: int

    def __str__(self) -> str:
        return f"s{self.wban}.{self.index}"


class SensorMode(Enum):
    AWAIT_SLOT = "await-slot"
    AWAIT_ACK = "await-ack"
    AWAIT_FBTDMA = "await-fbtdma"
    SLEEP = "sleep"


@dataclass
class Packet:
    sensor: SensorRef
    seq: int
    created_superframe: int
    receptions: int = 0


@dataclass
class SensorState:
    ref: SensorRef
    assigned_ts: int
    current_channel: ChannelId
    assigned_imts: Optional[int] = None
    stable_channel: Optional[ChannelId] = None
    heard_fcs_beacon: bool = False
    mode: SensorMode = SensorMode.SLEEP
    queue: deque[Packet] = field(default_factory=deque)
    next_seq: int = 0
    generated: int = 0
    delivered: int = 0
    duplicates: int = 0

    @property
    def wban(self) -> int:
        return self.ref.wban

    def packet_accounting(self) -> tuple[int, int, int, int]:
        """(generated, delivered, pending, duplicates); the last three partition the first."""
        pending = sum(1 for p in self.queue if p.receptions < 2)
        queued_duplicates = len(self.queue) - pending
        return (self.generated, self.delivered, pending, self.duplicates + queued_duplicates)


@dataclass
class CoordinatorState:
    wban: int
    default_channel: ChannelId
    lch: ChannelSet = field(default_factory=ChannelSet)
    lis: list[SensorRef] = field(default_factory=list)
    stable_channel: Optional[ChannelId] = None
    pending_acks: dict[int, SensorRef] = field(default_factory=dict)
    watermark: dict[int, int] = field(default_factory=dict)
    alerted: bool = False
    silent: bool = False
    alerts: int = 0
    mitigations: int = 0
    cr_engagements: int = 0
    channels_sensed: int = 0
    fbtdma_failures: int = 0
    duplicates_detected: int = 0

    def channels_in_use(self) -> ChannelSet:
        channels = ChannelSet.of([self.default_channel])
        if self.stable_channel is not None:
            channels = channels.add(self.stable_channel)
        return channels


class Network(NamedTuple):
    coordinators: list[CoordinatorState]
    sensors: list[list[SensorState]]

    def all_sensors(self) -> list[SensorState]:
        return [s for wban in self.sensors for s in wban]


class SuperframeSchedule(NamedTuple):
    """Slot layout one coordinator uses in one superframe."""

    tdma_slots: tuple[tuple[SensorRef, int], ...]
    fcs_length: int
    fbtdma_slots: tuple[tuple[SensorRef, int], ...]
    inactive_length: int


class SlotReport(NamedTuple):
    """What happened to one data transmission and its Ack."""

    sensor: SensorRef
    seq: int
    channel: ChannelId
    data_received: bool
    ack_sent: bool
    ack_received: bool
    duplicate: bool


class FcsDecision(NamedTuple):
    """Outcome of one coordinator's FCS frame."""

    stable_channel: Optional[ChannelId]
    fbtdma_slots: tuple[tuple[SensorRef, int], ...]
    us_size: int
    cr_engaged: bool
    sensed: tuple[ChannelId, ...]
    beacon: bool


NO_DECISION = FcsDecision(None, (), 0, False, (), False)


def setup_network(n_wbans: int, k_sensors: int, seed: int) -> Network:
    """Give every coordinator a uniform random default channel and its sensors TDMA slots 0..K-1."""
    if n_wbans < 1 or k_sensors < 1:
        raise ContractError(f"need at least one WBAN and one sensor, got {n_wbans}, {k_sensors}")
    coordinators = []
    sensors = []
    for w in range(n_wbans):
        default = int(make_rng(seed, STREAM_COORDINATOR, w).integers(NUM_CHANNELS))
        coordinators.append(CoordinatorState(wban=w, default_channel=default))
        sensors.append(
            [SensorState(ref=SensorRef(w, j), assigned_ts=j, current_channel=default) for j in range(k_sensors)]
        )
    return Network(coordinators, sensors)


def begin_superframe(network: Network, superframe: int) -> None:
    """Reset per-superframe state and generate one packet per sensor."""
    for crd, wban_sensors in zip(network.coordinators, network.sensors):
        crd.lis = []
        crd.stable_channel = None
        crd.alerted = False
        crd.silent = False
        crd.pending_acks = {s.assigned_ts: s.ref for s in wban_sensors}
        for sensor in wban_sensors:
            sensor.queue.append(Packet(sensor.ref, sensor.next_seq, superframe))
            sensor.next_seq += 1
            sensor.generated += 1
            sensor.mode = SensorMode.AWAIT_SLOT
            sensor.current_channel = crd.default_channel
            sensor.assigned_imts = None
            sensor.stable_channel = None
            sensor.heard_fcs_beacon = False


def tdma_schedule(wban_sensors: list[SensorState]) -> tuple[tuple[SensorRef, int], ...]:
    return tuple((s.ref, s.assigned_ts) for s in sorted(wban_sensors, key=lambda s: s.assigned_ts))


def _receive(crd: CoordinatorState, sensor: SensorRef, seq: int) -> bool:
    """Record a data reception; returns True when it is a duplicate."""
    duplicate = seq <= crd.watermark.get(sensor.index, -1)
    crd.watermark[sensor.index] = max(seq, crd.watermark.get(sensor.index, -1))
    if duplicate:
        crd.duplicates_detected += 1
    return duplicate


def _retire_head(sensor: SensorState) -> None:
    packet = sensor.queue.popleft()
    if packet.receptions >= 2:
        sensor.duplicates += 1
    else:
        sensor.delivered += 1


def coordinator_slot(
    crd: CoordinatorState, slot: int, seq: Optional[int]
) -> tuple[bool, bool]:
    """Coordinator side of one TDMA slot.

    Parameters
    ----------
    crd : CoordinatorState
        The coordinator.
    slot : int
        TDMA slot index.
    seq : int, optional
        Sequence number of the packet that arrived, or None if nothing did.

    Returns
    -------
    tuple[bool, bool]
        (ack_sent, duplicate). A missing packet appends the slot's sensor to LIS.
    """
    if slot not in crd.pending_acks:
        raise ContractError(f"WBAN {crd.wban} expects nothing in TDMA slot {slot}")
    expected = crd.pending_acks.pop(slot)
    if seq is None:
        crd.lis.append(expected)
        return False, False
    return True, _receive(crd, expected, seq)


def _exchange(
    sensor: SensorState,
    crd: CoordinatorState,
    air: SlotAir,
    channel: ChannelId,
    rng: Optional[np.random.Generator],
    on_data: Callable[[Optional[int]], tuple[bool, bool]],
) -> SlotReport:
    world = air.world
    sensor_pos = world.sensor_position(sensor.wban, sensor.ref.index)
    crd_pos = world.coordinators[crd.wban]
    packet = sensor.queue[0]

    data = air.outcome(crd.wban, Link(sensor_pos, crd_pos, world.radio.tx_power_dbm), channel, rng)
    received = data is Outcome.SUCCESS
    if received:
        packet.receptions += 1
    ack_sent, duplicate = on_data(packet.seq if received else None)

    ack_received = False
    if ack_sent:
        ack = air.outcome(
            crd.wban,
            Link(crd_pos, sensor_pos, world.radio.coordinator_tx_power_dbm),
            channel,
            rng,
        )
        ack_received = ack is Outcome.SUCCESS
    if ack_received:
        _retire_head(sensor)
        sensor.mode = SensorMode.SLEEP
    return SlotReport(sensor.ref, packet.seq, channel, received, ack_sent, ack_received, duplicate)


def tdma_slot(
    sensor: SensorState,
    crd: CoordinatorState,
    air: SlotAir,
    rng: Optional[np.random.Generator] = None,
) -> SlotReport:
    """Send the head packet in the sensor's TDMA slot and handle the Ack.

    On an Ack the sensor sleeps until the next superframe. Otherwise it stays in
    AWAIT_ACK until `expire_ack_timer` runs at the end of the slot.
    """
    if sensor.mode is not SensorMode.AWAIT_SLOT or not sensor.queue:
        raise ContractError(f"{sensor.ref} has nothing to send in its TDMA slot")
    sensor.mode = SensorMode.AWAIT_ACK
    return _exchange(
        sensor,
        crd,
        air,
        sensor.current_channel,
        rng,
        lambda seq: coordinator_slot(crd, sensor.assigned_ts, seq),
    )


def expire_ack_timer(sensor: SensorState, backup_frame: bool = True) -> bool:
    """End-of-slot timeout. Returns True when the sensor timed out.

    With a backup frame the sensor waits for FBTDMA; without one it sleeps and
    keeps the packet for the next superframe.
    """
    if sensor.mode is not SensorMode.AWAIT_ACK:
        return False
    sensor.mode = SensorMode.AWAIT_FBTDMA if backup_frame else SensorMode.SLEEP
    return True


def cr_candidates(lch: ChannelSet, default_channel: ChannelId) -> list[ChannelId]:
    """LCH channels in ascending order starting just above the default channel."""
    return [
        c
        for c in ((default_channel + step) % NUM_CHANNELS for step in range(1, NUM_CHANNELS))
        if c in lch
    ]


def fcs_frame(
    crd: CoordinatorState,
    model: NoiseModel,
    params: ProtocolParams,
    rng: np.random.Generator,
    sense: Callable[[ChannelId], ChannelVerdict],
) -> FcsDecision:
    """Pick the stable channel and lay out FBTDMA for this superframe's LIS.

    With unused channels available one is drawn uniformly from US without the
    CR; otherwise the CR scans LCH. If nothing qualifies the coordinator stays
    silent and its interfering sensors carry their packets over.
    """
    if not crd.lis:
        return NO_DECISION

    crd.alerted = True
    crd.mitigations += 1
    us = compute_us(G, crd.lch, crd.default_channel)
    engaged = False
    sensed: tuple[ChannelId, ...] = ()
    if us:
        choices = list(us)
        stable: Optional[ChannelId] = choices[int(rng.integers(len(choices)))]
    else:
        engaged = True
        result = select_stable_channel(
            cr_candidates(crd.lch, crd.default_channel), model, params.stability_threshold, sense
        )
        stable, sensed = result.channel, result.sensed
        crd.cr_engagements += 1
        crd.channels_sensed += len(sensed)

    if stable is None:
        crd.silent = True
        return FcsDecision(None, (), len(us), engaged, sensed, False)

    crd.stable_channel = stable
    slots = tuple((ref, m) for m, ref in enumerate(crd.lis))
    return FcsDecision(stable, slots, len(us), engaged, sensed, True)


def deliver_fcs_beacon(sensor: SensorState, decision: FcsDecision, heard: bool) -> None:
    """Apply the short beacon at one interfering sensor."""
    if not heard or decision.stable_channel is None:
        return
    for ref, slot in decision.fbtdma_slots:
        if ref == sensor.ref:
            sensor.heard_fcs_beacon = True
            sensor.assigned_imts = slot
            sensor.stable_channel = decision.stable_channel
            return


def fbtdma_slot(
    sensor: SensorState,
    crd: CoordinatorState,
    air: SlotAir,
    rng: Optional[np.random.Generator] = None,
) -> Optional[SlotReport]:
    """Retransmit on the stable channel in the sensor's backup slot.

    Returns None when the sensor missed the FCS beacon: it cannot retransmit and
    the packet is carried over. A failed retransmission also carries over and
    counts as an FBTDMA failure at the coordinator.
    """
    if sensor.mode is not SensorMode.AWAIT_FBTDMA:
        raise ContractError(f"{sensor.ref} is not waiting for a backup slot")
    if not sensor.heard_fcs_beacon or sensor.stable_channel is None:
        sensor.mode = SensorMode.SLEEP
        return None

    report = _exchange(
        sensor,
        crd,
        air,
        sensor.stable_channel,
        rng,
        lambda seq: (False, False) if seq is None else (True, _receive(crd, sensor.ref, seq)),
    )
    if not report.ack_received:
        sensor.mode = SensorMode.SLEEP
    if not report.data_received:
        crd.fbtdma_failures += 1
        crd.alerted = True
    return report


def end_superframe(network: Network) -> None:
    """Carry over whatever was not delivered and register BLE alerts."""
    for crd in network.coordinators:
        if crd.alerted:
            crd.alerts += 1
    for sensor in network.all_sensors():
        sensor.mode = SensorMode.SLEEP
        sensor.assigned_imts = None


def superframe_schedule(
    crd: CoordinatorState, wban_sensors: list[SensorState], decision: FcsDecision, layout: SuperframeLayout
) -> SuperframeSchedule:
    return SuperframeSchedule(
        tdma_slots=tdma_schedule(wban_sensors),
        fcs_length=layout.fcs_length,
        fbtdma_slots=decision.fbtdma_slots,
        inactive_length=layout.inactive_length,
    )
