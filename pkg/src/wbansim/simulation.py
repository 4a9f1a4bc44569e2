"""One scenario run: the event loop driving the world and the CSIM or SSA automata."""

import logging
from typing import NamedTuple, Optional

from .baseline import (
    ChannelAssignment,
    InterferenceSet,
    assign_orthogonal_channels,
    build_interference_sets,
    channel_pressure,
    wban_channels,
)
from .config import Scheme, ScenarioConfig, validate_config
from .engine import (
    STREAM_CHANNEL_CHOICE,
    STREAM_COORDINATOR,
    STREAM_SENSOR,
    STREAM_SSA,
    Event,
    EventKind,
    EventQueue,
    make_rng,
)
from .metrics import (
    ChannelUsage,
    DeliveryCounters,
    EnergyTally,
    MetricsRecord,
    RunSummary,
    coordinator_energy,
    csim_availability,
    ssa_availability,
    summarize,
)
from .protocol import (
    NO_DECISION,
    FcsDecision,
    SensorMode,
    SensorRef,
    SensorState,
    SlotReport,
    SuperframeLayout,
    SuperframeSchedule,
    begin_superframe,
    deliver_fcs_beacon,
    end_superframe,
    expire_ack_timer,
    fbtdma_slot,
    fcs_frame,
    setup_network,
    superframe_schedule,
    tdma_slot,
)
from .spectrum import G, NUM_CHANNELS, ChannelSet, sense_channel
from .trace import TraceRecord, TraceSink
from .world import Link, Outcome, Transmission, World, coordinator_id

logger = logging.getLogger(__name__)


class FrameRef(NamedTuple):
    frame: str
    slot: int


class ScheduleRecord(NamedTuple):
    """What one coordinator decided in one superframe (kept when requested)."""

    superframe: int
    wban: int
    lis: tuple[SensorRef, ...]
    schedule: SuperframeSchedule
    decision: FcsDecision


class SimulationResult(NamedTuple):
    summary: RunSummary
    records: list[MetricsRecord]
    tallies: list[EnergyTally]
    events_processed: int
    packets: tuple[int, int, int, int]


class Simulation:
    """Runs one scenario for `superframes_per_run` superframes.

    Every WBAN shares the same superframe timing, so the TDMA slot j of all
    WBANs happens in the same tick.
    """

    def __init__(
        self,
        config: ScenarioConfig,
        trace: Optional[TraceSink] = None,
        record_events: bool = False,
        record_schedules: bool = False,
    ):
        validate_config(config)
        self.config = config
        self.csim = config.scheme is Scheme.CSIM
        self.trace = trace
        self.layout = SuperframeLayout(
            config.k_sensors, config.protocol.fcs_length, config.protocol.inactive_length
        )
        self.queue = EventQueue(record_trace=record_events)
        self.world = World(
            config.n_wbans,
            config.k_sensors,
            config.n_iot_devices,
            config.seed,
            config.geometry,
            config.radio,
            config.background,
        )
        self.network = setup_network(config.n_wbans, config.k_sensors, config.seed)
        self.schedules: Optional[list[ScheduleRecord]] = [] if record_schedules else None

        seed = config.seed
        self._choice_rngs = [make_rng(seed, STREAM_CHANNEL_CHOICE, w) for w in range(config.n_wbans)]
        self._sensing_rngs = [make_rng(seed, STREAM_COORDINATOR, w, 1) for w in range(config.n_wbans)]
        self._link_rngs = {
            s.ref: make_rng(seed, STREAM_SENSOR, s.ref.wban, s.ref.index)
            for s in self.network.all_sensors()
        }
        self._ssa_rng = make_rng(seed, STREAM_SSA)

        self._superframe = 0
        self._last_channels = [ChannelSet.of([c.default_channel]) for c in self.network.coordinators]
        self._vicinity = [ChannelSet() for _ in range(config.n_wbans)]
        self._decisions: list[FcsDecision] = [NO_DECISION] * config.n_wbans
        self._sets: list[InterferenceSet] = []
        self._assignment = ChannelAssignment({}, frozenset())
        self._counters: list[list[int]] = []
        self._usage: list[int] = []
        self._fbtdma_attempts = [0] * config.n_wbans
        self._tallies = [EnergyTally() for _ in range(config.n_wbans)]
        self.records: list[MetricsRecord] = []

        self.queue.on(EventKind.SUPERFRAME_BOUNDARY, self._on_boundary)
        self.queue.on(EventKind.MOBILITY_STEP, self._on_mobility)
        self.queue.on(EventKind.BLE_BROADCAST, self._on_ble)
        self.queue.on(EventKind.BEACON, self._on_beacon)
        self.queue.on(EventKind.TRANSMISSION, self._on_transmission)
        self.queue.on(EventKind.ACK_DEADLINE, self._on_ack_deadline)
        self.queue.on(EventKind.SLOT_START, self._on_fcs)

    # Helpers

    def _emit(self, tick: int, node: str, frame: str, slot: int, channel: int, outcome: str) -> None:
        if self.trace is not None:
            self.trace(
                TraceRecord(
                    self.config.scheme.value, self._superframe, tick, node, frame, slot, channel, outcome
                )
            )

    def _sensor(self, ref: SensorRef) -> SensorState:
        return self.network.sensors[ref.wban][ref.index]

    def _count(self, wban: int, field: int) -> None:
        self._counters[wban][field] += 1

    def _trace_exchange(self, tick: int, frame: str, slot: int, report: SlotReport) -> None:
        if report.duplicate:
            outcome = "duplicate"
        elif report.data_received:
            outcome = "delivered"
        else:
            outcome = "collision"
        self._emit(tick, str(report.sensor), frame, slot, report.channel, outcome)
        if report.ack_sent:
            self._emit(
                tick,
                coordinator_id(report.sensor.wban),
                frame,
                slot,
                report.channel,
                "ack" if report.ack_received else "ack-lost",
            )

    # Handlers

    def _on_boundary(self, event: Event) -> None:
        superframe = event.payload
        if superframe > 0:
            self._finish_superframe()

        self._superframe = superframe
        origin = self.layout.origin(superframe)
        self.world.start_superframe(superframe, origin, self.layout.active_ticks)
        begin_superframe(self.network, superframe)
        self._counters = [[0, 0, 0, 0] for _ in range(self.config.n_wbans)]
        self._usage = []
        self._fbtdma_attempts = [0] * self.config.n_wbans
        self._decisions = [NO_DECISION] * self.config.n_wbans

        schedule = self.queue.schedule
        schedule(origin, EventKind.MOBILITY_STEP, superframe)
        if superframe % self.config.protocol.ble_period == 0:
            schedule(origin, EventKind.BLE_BROADCAST, superframe)
        schedule(origin, EventKind.BEACON, "superframe")
        for j in range(self.config.k_sensors):
            tick = origin + self.layout.tdma_start + j
            schedule(tick, EventKind.TRANSMISSION, FrameRef("tdma", j))
            schedule(tick, EventKind.ACK_DEADLINE, FrameRef("tdma", j))
        if self.csim:
            schedule(origin + self.layout.fcs_start, EventKind.SLOT_START, "fcs")
            schedule(origin + self.layout.beacon_offset, EventKind.BEACON, "fcs")
            for m in range(self.config.k_sensors):
                schedule(origin + self.layout.backup_start + m, EventKind.TRANSMISSION, FrameRef("fbtdma", m))
        if superframe + 1 < self.config.superframes_per_run:
            schedule(origin + self.layout.period, EventKind.SUPERFRAME_BOUNDARY, superframe + 1)

    def _on_mobility(self, event: Event) -> None:
        if event.payload > 0:
            self.world.mobility_step()
        if self.csim:
            return
        self._sets = build_interference_sets(self.world)
        self._assignment = assign_orthogonal_channels(self._sets, G, self._ssa_rng)
        for ref, channel in self._assignment.channels.items():
            self._sensor(ref).current_channel = channel

    def _on_ble(self, event: Event) -> None:
        announcements = self.world.emit_ble_announcements(event.time, self._last_channels)
        for crd in self.network.coordinators:
            self._vicinity[crd.wban] = self.world.nearby(crd.wban, announcements)
            if self.csim:
                crd.lch = self.world.lch(crd.wban, announcements)

    def _on_beacon(self, event: Event) -> None:
        tick = event.time
        if event.payload == "superframe":
            for crd in self.network.coordinators:
                self._emit(tick, coordinator_id(crd.wban), "beacon", 0, crd.default_channel, "sent")
            return

        beaconing = [
            crd for crd, decision in zip(self.network.coordinators, self._decisions) if decision.beacon
        ]
        air = self.world.air(
            tick,
            [
                Transmission(
                    crd.wban,
                    self.world.coordinators[crd.wban],
                    self.config.radio.coordinator_tx_power_dbm,
                    crd.default_channel,
                )
                for crd in beaconing
            ],
        )
        for crd in beaconing:
            decision = self._decisions[crd.wban]
            for ref, _ in decision.fbtdma_slots:
                sensor = self._sensor(ref)
                link = Link(
                    self.world.coordinators[crd.wban],
                    self.world.sensor_position(ref.wban, ref.index),
                    self.config.radio.coordinator_tx_power_dbm,
                )
                heard = air.outcome(crd.wban, link, crd.default_channel, self._link_rngs[ref]) is Outcome.SUCCESS
                deliver_fcs_beacon(sensor, decision, heard)
                self._emit(tick, str(ref), "fcs", self.layout.fcs_length - 1, crd.default_channel,
                           "beacon-ok" if heard else "beacon-lost")

    def _on_fcs(self, event: Event) -> None:
        tick = event.time
        for crd, wban_sensors in zip(self.network.coordinators, self.network.sensors):
            if crd.lis:
                occupancy = [
                    self.world.vicinity_occupancy(crd.wban, c, tick) for c in range(NUM_CHANNELS)
                ]
                model = self.config.noise.with_scales(
                    [1.0 + k * self.config.protocol.occupancy_gain for k in occupancy]
                )
                rng = self._sensing_rngs[crd.wban]
                decision = fcs_frame(
                    crd,
                    model,
                    self.config.protocol,
                    self._choice_rngs[crd.wban],
                    lambda channel: sense_channel(channel, model, rng),
                )
                if decision.beacon:
                    outcome = "cr" if decision.cr_engaged else "us"
                else:
                    outcome = "silent"
                self._emit(
                    tick,
                    coordinator_id(crd.wban),
                    "fcs",
                    0,
                    -1 if decision.stable_channel is None else decision.stable_channel,
                    outcome,
                )
            else:
                decision = NO_DECISION
            self._decisions[crd.wban] = decision
            if self.schedules is not None:
                self.schedules.append(
                    ScheduleRecord(
                        self._superframe,
                        crd.wban,
                        tuple(crd.lis),
                        superframe_schedule(crd, wban_sensors, decision, self.layout),
                        decision,
                    )
                )

    def _on_transmission(self, event: Event) -> None:
        ref: FrameRef = event.payload
        if ref.frame == "tdma":
            self._tdma(event.time, ref.slot)
        else:
            self._fbtdma(event.time, ref.slot)

    def _tdma(self, tick: int, slot: int) -> None:
        senders = [
            s
            for wban_sensors in self.network.sensors
            for s in wban_sensors
            if s.assigned_ts == slot and s.mode is SensorMode.AWAIT_SLOT
        ]
        air = self.world.air(
            tick,
            [
                Transmission(
                    s.wban,
                    self.world.sensor_position(s.wban, s.ref.index),
                    self.config.radio.tx_power_dbm,
                    s.current_channel,
                )
                for s in senders
            ],
        )
        self._usage.extend(s.current_channel for s in senders)
        for sensor in senders:
            crd = self.network.coordinators[sensor.wban]
            report = tdma_slot(sensor, crd, air, self._link_rngs[sensor.ref])
            self._count(sensor.wban, 0)
            if report.data_received:
                self._count(sensor.wban, 1)
            elif not self.csim:
                self._count(sensor.wban, 2)
            self._trace_exchange(tick, "tdma", slot, report)

    def _fbtdma(self, tick: int, slot: int) -> None:
        senders = []
        for crd, decision in zip(self.network.coordinators, self._decisions):
            if slot < len(decision.fbtdma_slots):
                sensor = self._sensor(decision.fbtdma_slots[slot][0])
                if sensor.mode is SensorMode.AWAIT_FBTDMA:
                    senders.append(sensor)
        on_air = [s for s in senders if s.heard_fcs_beacon and s.stable_channel is not None]
        self._usage.extend(s.stable_channel for s in on_air)
        air = self.world.air(
            tick,
            [
                Transmission(
                    s.wban,
                    self.world.sensor_position(s.wban, s.ref.index),
                    self.config.radio.tx_power_dbm,
                    s.stable_channel,
                )
                for s in on_air
            ],
        )
        for sensor in senders:
            crd = self.network.coordinators[sensor.wban]
            report = fbtdma_slot(sensor, crd, air, self._link_rngs[sensor.ref])
            if report is None:
                continue
            self._fbtdma_attempts[sensor.wban] += 1
            self._count(sensor.wban, 1 if report.data_received else 2)
            self._trace_exchange(tick, "fbtdma", slot, report)

    def _on_ack_deadline(self, event: Event) -> None:
        slot = event.payload.slot
        for wban_sensors in self.network.sensors:
            for sensor in wban_sensors:
                if sensor.assigned_ts == slot:
                    expire_ack_timer(sensor, backup_frame=self.csim)

    # Bookkeeping

    def _finish_superframe(self) -> None:
        config = self.config
        n = config.n_wbans
        end_superframe(self.network)

        if self.csim:
            for w, crd in enumerate(self.network.coordinators):
                self._counters[w][3] = len(crd.lis) - self._fbtdma_attempts[w]
            available = [csim_availability(self._vicinity[w]) for w in range(n)]
            self._last_channels = [crd.channels_in_use() for crd in self.network.coordinators]
        else:
            available = [
                ssa_availability(channel_pressure(w, self._sets, self._assignment, self._vicinity[w]))
                for w in range(n)
            ]
            self._last_channels = [
                wban_channels(crd.wban, config.k_sensors, crd.default_channel, self._assignment)
                for crd in self.network.coordinators
            ]

        energy_w: list[float] = []
        energy_wo: list[float] = []
        if self.csim:
            for w, crd in enumerate(self.network.coordinators):
                before = self._tallies[w]
                after = EnergyTally(
                    slots=before.slots + self.layout.period,
                    alerts=crd.alerts,
                    cr_engagements=crd.cr_engagements,
                    channels_scanned=crd.channels_sensed,
                    mitigations=crd.mitigations,
                )
                self._tallies[w] = after
                for bucket, ble in ((energy_w, True), (energy_wo, False)):
                    bucket.append(
                        coordinator_energy(after, config.energy, ble)
                        - coordinator_energy(before, config.energy, ble)
                    )

        counters = DeliveryCounters()
        for row in self._counters:
            counters = counters.merged(DeliveryCounters(*row))
        self.records.append(
            MetricsRecord(
                superframe=self._superframe,
                available=tuple(available),
                usage=ChannelUsage(n, tuple(self._usage)),
                energy_w=tuple(energy_w),
                energy_wo=tuple(energy_wo),
                counters=counters,
            )
        )
        logger.debug(
            "superframe %d: LIS sizes %s, CR engagements %d",
            self._superframe,
            [len(c.lis) for c in self.network.coordinators],
            sum(1 for d in self._decisions if d.cr_engaged),
        )

    def run(self) -> SimulationResult:
        config = self.config
        logger.debug(
            "running %s: %d WBANs x %d sensors, %d IoT devices, %d superframes, seed %d",
            config.scheme.value,
            config.n_wbans,
            config.k_sensors,
            config.n_iot_devices,
            config.superframes_per_run,
            config.seed,
        )
        self.queue.schedule(0, EventKind.SUPERFRAME_BOUNDARY, 0)
        processed = self.queue.run_until(config.superframes_per_run * self.layout.period - 1)
        self._finish_superframe()

        totals = [0, 0, 0, 0]
        for sensor in self.network.all_sensors():
            for i, value in enumerate(sensor.packet_accounting()):
                totals[i] += value
        summary = summarize(
            self.records,
            self._tallies if self.csim else None,
            config.energy,
            config.metrics.reuse_definition,
            totals[3],
        )
        logger.debug("run finished: %d events, Pr_AvChs %.4f", processed, summary.pr_avchs)
        return SimulationResult(
            summary, self.records, list(self._tallies) if self.csim else [], processed, tuple(totals)
        )


def run_simulation(config: ScenarioConfig, trace: Optional[TraceSink] = None) -> SimulationResult:
    """Run one scenario and return its metrics."""
    return Simulation(config, trace=trace).run()
