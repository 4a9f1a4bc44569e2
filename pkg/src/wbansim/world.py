"""Physical scenario: placement, mobility, propagation, background devices and BLE."""

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .engine import (
    STREAM_IOT,
    STREAM_MOBILITY,
    STREAM_PLACEMENT,
    ContractError,
    SimTime,
    make_rng,
)
from .spectrum import NUM_CHANNELS, ChannelId, ChannelSet

MIN_DISTANCE_M = 0.1

# ZigBee channel indices covered by Wi-Fi channels 1, 6 and 11.
WIFI_BLOCKS = (
    ChannelSet.of(range(0, 4)),
    ChannelSet.of(range(5, 9)),
    ChannelSet.of(range(10, 14)),
)

# Placement sub-streams
_PLACE_COORDINATOR = 0
_PLACE_SENSOR = 1
_PLACE_IOT = 2


class Position(NamedTuple):
    """A point in the room, in meters."""

    x: float
    y: float
    z: float

    def distance_to(self, other: "Position") -> float:
        return math.dist(self, other)

    def shifted(self, offset: Sequence[float]) -> "Position":
        return Position(self.x + offset[0], self.y + offset[1], self.z + offset[2])


class Geometry(NamedTuple):
    """Room size and body radius."""

    room_x: float = 10.0
    room_y: float = 10.0
    room_z: float = 4.0
    body_radius_m: float = 1.0

    def contains(self, p: Position, tolerance: float = 1e-9) -> bool:
        return (
            -tolerance <= p.x <= self.room_x + tolerance
            and -tolerance <= p.y <= self.room_y + tolerance
            and -tolerance <= p.z <= self.room_z + tolerance
        )


class RadioParams(NamedTuple):
    """Link-budget and decision parameters (powers in dBm, ratios in dB)."""

    tx_power_dbm: float = -10.0
    coordinator_tx_power_dbm: float = -10.0
    snr_threshold_db: float = -25.0
    path_loss_exponent: float = 3.0
    reference_loss_db: float = 40.0
    noise_floor_dbm: float = -90.0
    collision_prob: float = 1.0
    vicinity_reference_dbm: float = -30.0
    ble_range_m: float = 100.0
    slot_duration_s: float = 0.01


class BackgroundParams(NamedTuple):
    """Traffic model of the background IoT devices."""

    wifi_fraction: float = 0.9
    wifi_tx_power_dbm: float = 20.0
    narrowband_tx_power_dbm: float = 0.0
    duty_cycle: float = 0.5
    epoch_superframes: int = 20


class DeviceKind(Enum):
    WIFI = "wifi"
    NARROWBAND = "narrowband"


@dataclass
class IotDevice:
    """A background device; its channel set is re-drawn every epoch."""

    device_id: int
    kind: DeviceKind
    position: Position
    occupied_channels: ChannelSet
    duty_cycle: float
    tx_power_dbm: float

    @property
    def node_id(self) -> str:
        return iot_id(self.device_id)


class BleAnnouncement(NamedTuple):
    """Channels one device used during the period that just ended."""

    source_id: str
    channels_in_use: ChannelSet
    emitted_at: SimTime
    position: Position
    tx_power_dbm: float


class Transmitter(NamedTuple):
    position: Position
    tx_power_dbm: float


class Link(NamedTuple):
    tx: Position
    rx: Position
    tx_power_dbm: float


class Transmission(NamedTuple):
    """A WBAN transmission on the air during one tick."""

    wban: int
    position: Position
    tx_power_dbm: float
    channel: ChannelId


class Outcome(Enum):
    SUCCESS = "success"
    COLLISION = "collision"


class Placement(NamedTuple):
    coordinators: list[Position]
    sensor_offsets: list[list[tuple[float, float, float]]]
    iot: list[Position]


def coordinator_id(wban: int) -> str:
    return f"crd{wban}"


def iot_id(device: int) -> str:
    return f"iot{device}"


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(mw)


def received_power_dbm(
    tx: Position, rx: Position, params: RadioParams, tx_power_dbm: Optional[float] = None
) -> float:
    """Log-distance received power; distances below 0.1 m are clamped.

    Parameters
    ----------
    tx, rx : Position
        Transmitter and receiver positions.
    params : RadioParams
        Supplies exponent, reference loss at 1 m and the default power.
    tx_power_dbm : float, optional
        Transmit power; defaults to the sensor power.
    """
    power = params.tx_power_dbm if tx_power_dbm is None else tx_power_dbm
    distance = max(tx.distance_to(rx), MIN_DISTANCE_M)
    return power - params.reference_loss_db - 10.0 * params.path_loss_exponent * math.log10(distance)


def sinr_db(link: Link, interferers: Sequence[Transmitter], params: RadioParams) -> float:
    """Signal over co-channel interference plus noise floor, in dB."""
    signal = received_power_dbm(link.tx, link.rx, params, link.tx_power_dbm)
    denominator = dbm_to_mw(params.noise_floor_dbm) + sum(
        dbm_to_mw(received_power_dbm(i.position, link.rx, params, i.tx_power_dbm))
        for i in interferers
    )
    return signal - mw_to_dbm(denominator)


def transmission_outcome(
    link: Link,
    concurrent: Sequence[Transmitter],
    channel: ChannelId,
    params: RadioParams,
    rng: Optional[np.random.Generator] = None,
) -> Outcome:
    """Decide whether one transmission survives its co-channel interferers.

    Below the SINR threshold the transmission collides with probability
    `params.collision_prob`; the Bernoulli draw is taken from `rng` only when
    that probability is strictly between 0 and 1.
    """
    if not 0 <= channel < NUM_CHANNELS:
        raise ContractError(f"channel index out of range: {channel}")
    if sinr_db(link, concurrent, params) >= params.snr_threshold_db:
        return Outcome.SUCCESS
    if params.collision_prob >= 1.0:
        return Outcome.COLLISION
    if params.collision_prob <= 0.0:
        return Outcome.SUCCESS
    if rng is None:
        raise ContractError("a random stream is needed when 0 < collision_prob < 1")
    return Outcome.COLLISION if rng.random() < params.collision_prob else Outcome.SUCCESS


def _uniform_position(rng: np.random.Generator, geometry: Geometry, inset: float) -> Position:
    x, y, z = rng.uniform(
        (inset, inset, inset),
        (geometry.room_x - inset, geometry.room_y - inset, geometry.room_z - inset),
    )
    return Position(float(x), float(y), float(z))


def _ball_offset(rng: np.random.Generator, radius: float) -> tuple[float, float, float]:
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    r = radius * rng.random() ** (1.0 / 3.0)
    dx, dy, dz = direction * r
    return (float(dx), float(dy), float(dz))


def place_nodes(
    n_wbans: int, k_sensors: int, n_iot: int, geometry: Geometry, seed: int
) -> Placement:
    """Place coordinators, their sensors and the background devices.

    Coordinators are uniform in the room shrunk by the body radius, so a body
    moved rigidly anywhere keeps every sensor inside the room. Sensors are
    uniform in the ball of radius `body_radius_m` around their coordinator;
    IoT devices are uniform in the whole room. Each entity draws from its own
    stream.
    """
    if n_wbans < 1 or k_sensors < 1 or n_iot < 0:
        raise ContractError(
            f"need n_wbans >= 1, k_sensors >= 1, n_iot >= 0; got {n_wbans}, {k_sensors}, {n_iot}"
        )
    coordinators = [
        _uniform_position(make_rng(seed, STREAM_PLACEMENT, _PLACE_COORDINATOR, w), geometry, geometry.body_radius_m)
        for w in range(n_wbans)
    ]
    offsets = [
        [
            _ball_offset(make_rng(seed, STREAM_PLACEMENT, _PLACE_SENSOR, w, j), geometry.body_radius_m)
            for j in range(k_sensors)
        ]
        for w in range(n_wbans)
    ]
    iot = [
        _uniform_position(make_rng(seed, STREAM_PLACEMENT, _PLACE_IOT, d), geometry, 0.0)
        for d in range(n_iot)
    ]
    return Placement(coordinators, offsets, iot)


def in_vicinity(
    source: Position, source_power_dbm: float, coordinator: Position, params: RadioParams
) -> bool:
    """Whether a device's traffic is heard at a coordinator.

    The device must be within BLE range and its received power must clear the
    vicinity reference by at least the SNR threshold.
    """
    if source.distance_to(coordinator) > params.ble_range_m:
        return False
    rx = received_power_dbm(source, coordinator, params, source_power_dbm)
    return rx - params.vicinity_reference_dbm >= params.snr_threshold_db


def lch_from_announcements(
    own_id: str,
    coordinator: Position,
    announcements: Sequence[BleAnnouncement],
    params: RadioParams,
) -> ChannelSet:
    """Union of the channels announced by every other device within BLE range."""
    lch = ChannelSet()
    for announcement in announcements:
        if announcement.source_id == own_id:
            continue
        if announcement.position.distance_to(coordinator) <= params.ble_range_m:
            lch = lch | announcement.channels_in_use
    return lch


def nearby_channels(
    own_id: str,
    coordinator: Position,
    announcements: Sequence[BleAnnouncement],
    params: RadioParams,
) -> ChannelSet:
    """Channels announced by other devices whose traffic is heard at the coordinator.

    This is the subset of LCH that actually costs the coordinator a channel;
    it shrinks as the SNR threshold rises.
    """
    channels = ChannelSet()
    for announcement in announcements:
        if announcement.source_id == own_id:
            continue
        if in_vicinity(announcement.position, announcement.tx_power_dbm, coordinator, params):
            channels = channels | announcement.channels_in_use
    return channels


class World:
    """Mutable physical state of one scenario, owned by the simulation loop."""

    def __init__(
        self,
        n_wbans: int,
        k_sensors: int,
        n_iot: int,
        seed: int,
        geometry: Geometry = Geometry(),
        radio: RadioParams = RadioParams(),
        background: BackgroundParams = BackgroundParams(),
    ):
        self.n_wbans = n_wbans
        self.k_sensors = k_sensors
        self.geometry = geometry
        self.radio = radio
        self.background = background

        placement = place_nodes(n_wbans, k_sensors, n_iot, geometry, seed)
        self.coordinators: list[Position] = list(placement.coordinators)
        self.sensor_offsets = placement.sensor_offsets
        self._mobility_rngs = [make_rng(seed, STREAM_MOBILITY, w) for w in range(n_wbans)]
        self._iot_rngs = [make_rng(seed, STREAM_IOT, d) for d in range(n_iot)]

        self.iot_devices: list[IotDevice] = []
        for d, position in enumerate(placement.iot):
            is_wifi = make_rng(seed, STREAM_PLACEMENT, _PLACE_IOT, d, 1).random() < background.wifi_fraction
            self.iot_devices.append(
                IotDevice(
                    device_id=d,
                    kind=DeviceKind.WIFI if is_wifi else DeviceKind.NARROWBAND,
                    position=position,
                    occupied_channels=ChannelSet(),
                    duty_cycle=background.duty_cycle,
                    tx_power_dbm=(
                        background.wifi_tx_power_dbm if is_wifi else background.narrowband_tx_power_dbm
                    ),
                )
            )

        self._activity = np.zeros((n_iot, 0), dtype=bool)
        self._activity_origin: SimTime = 0

    # Geometry

    def sensor_position(self, wban: int, index: int) -> Position:
        return self.coordinators[wban].shifted(self.sensor_offsets[wban][index])

    def sensor_positions(self, wban: int) -> list[Position]:
        return [self.sensor_position(wban, j) for j in range(len(self.sensor_offsets[wban]))]

    def mobility_step(self) -> None:
        """Move every body to a fresh uniform position; sensors follow rigidly."""
        inset = self.geometry.body_radius_m
        self.coordinators = [
            _uniform_position(rng, self.geometry, inset) for rng in self._mobility_rngs
        ]

    # Background devices

    def start_superframe(self, superframe: int, origin: SimTime, active_ticks: int) -> None:
        """Re-draw channel sets on epoch boundaries and draw this superframe's activity.

        Draws come only from each device's own stream, so they do not depend on
        anything the WBANs do.
        """
        epoch = max(1, self.background.epoch_superframes)
        rows = []
        for device, rng in zip(self.iot_devices, self._iot_rngs):
            if superframe % epoch == 0:
                if device.kind is DeviceKind.WIFI:
                    device.occupied_channels = WIFI_BLOCKS[int(rng.integers(len(WIFI_BLOCKS)))]
                else:
                    device.occupied_channels = ChannelSet.of([int(rng.integers(NUM_CHANNELS))])
            rows.append(rng.random(active_ticks) < device.duty_cycle)
        self._activity = np.array(rows, dtype=bool).reshape(len(self.iot_devices), active_ticks)
        self._activity_origin = origin

    def iot_active(self, device: int, tick: SimTime) -> bool:
        offset = tick - self._activity_origin
        if not 0 <= offset < self._activity.shape[1]:
            return False
        return bool(self._activity[device, offset])

    def active_iot_on(self, channel: ChannelId, tick: SimTime) -> list[IotDevice]:
        return [
            device
            for device in self.iot_devices
            if channel in device.occupied_channels and self.iot_active(device.device_id, tick)
        ]

    def vicinity_occupancy(self, wban: int, channel: ChannelId, tick: SimTime) -> int:
        """Number of vicinity devices transmitting on `channel` at `tick`."""
        coordinator = self.coordinators[wban]
        return sum(
            1
            for device in self.active_iot_on(channel, tick)
            if in_vicinity(device.position, device.tx_power_dbm, coordinator, self.radio)
        )

    # BLE

    def emit_ble_announcements(
        self, time: SimTime, coordinator_channels: Sequence[ChannelSet]
    ) -> list[BleAnnouncement]:
        """Announcements of every coordinator and background device this period."""
        announcements = [
            BleAnnouncement(
                coordinator_id(w),
                channels,
                time,
                self.coordinators[w],
                self.radio.tx_power_dbm,
            )
            for w, channels in enumerate(coordinator_channels)
            if channels
        ]
        announcements.extend(
            BleAnnouncement(
                device.node_id, device.occupied_channels, time, device.position, device.tx_power_dbm
            )
            for device in self.iot_devices
            if device.occupied_channels
        )
        return announcements

    def lch(self, wban: int, announcements: Sequence[BleAnnouncement]) -> ChannelSet:
        return lch_from_announcements(
            coordinator_id(wban), self.coordinators[wban], announcements, self.radio
        )

    def nearby(self, wban: int, announcements: Sequence[BleAnnouncement]) -> ChannelSet:
        return nearby_channels(
            coordinator_id(wban), self.coordinators[wban], announcements, self.radio
        )

    # Air interface

    def air(self, tick: SimTime, transmissions: Sequence[Transmission]) -> "SlotAir":
        return SlotAir(self, tick, transmissions)


class SlotAir:
    """Everything on the air during one tick.

    A transmission of WBAN w is interfered by every other WBAN's transmission
    on the same channel and by every background device active on it.
    """

    def __init__(self, world: World, tick: SimTime, transmissions: Sequence[Transmission]):
        self.world = world
        self.tick = tick
        self.transmissions = list(transmissions)
        self._background: dict[ChannelId, list[Transmitter]] = {}

    def interferers(self, wban: int, channel: ChannelId) -> list[Transmitter]:
        found = [
            Transmitter(t.position, t.tx_power_dbm)
            for t in self.transmissions
            if t.channel == channel and t.wban != wban
        ]
        if channel not in self._background:
            self._background[channel] = [
                Transmitter(device.position, device.tx_power_dbm)
                for device in self.world.active_iot_on(channel, self.tick)
            ]
        return found + self._background[channel]

    def outcome(
        self,
        wban: int,
        link: Link,
        channel: ChannelId,
        rng: Optional[np.random.Generator] = None,
    ) -> Outcome:
        return transmission_outcome(
            link, self.interferers(wban, channel), channel, self.world.radio, rng
        )
