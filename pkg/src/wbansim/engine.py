"""Deterministic discrete-event core: virtual clock, event queue and seeded streams."""

import heapq
from enum import IntEnum
from typing import Any, Callable, NamedTuple, Optional

import numpy as np

SimTime = int  # ticks; one tick is one time-slot


class SimulationError(Exception):
    """Base class for all simulator errors."""


class SchedulingError(SimulationError):
    """The event queue was asked to do something it cannot (past events, double cancel)."""


class ContractError(SimulationError, ValueError):
    """A function was called outside its documented domain."""


class EventKind(IntEnum):
    """Event tags understood by the simulation handlers."""

    SLOT_START = 0
    BEACON = 1
    TRANSMISSION = 2
    ACK_DEADLINE = 3
    SUPERFRAME_BOUNDARY = 4
    MOBILITY_STEP = 5
    BLE_BROADCAST = 6


class Event(NamedTuple):
    """A scheduled event."""

    time: SimTime
    sequence: int
    kind: EventKind
    payload: Any = None


class EventHandle(NamedTuple):
    """Returned by `EventQueue.schedule`; pass it to `cancel`."""

    time: SimTime
    sequence: int


Handler = Callable[[Event], None]


class EventQueue:
    """Single-threaded event loop with FIFO tie-breaking among equal times."""

    def __init__(self, record_trace: bool = False):
        self.now: SimTime = 0
        self._heap: list[tuple[int, int, Event]] = []
        self._sequence = 0
        self._cancelled: set[int] = set()
        self._handlers: dict[EventKind, Handler] = {}
        self.trace: Optional[list[tuple[int, int, int]]] = [] if record_trace else None

    def on(self, kind: EventKind, handler: Handler) -> None:
        """Register the handler for one event kind (replaces any previous one)."""
        self._handlers[kind] = handler

    def schedule(self, time: SimTime, kind: EventKind, payload: Any = None) -> EventHandle:
        """Enqueue an event at `time`.

        Raises
        ------
        SchedulingError
            If `time` lies before the current clock.
        """
        if time < self.now:
            raise SchedulingError(
                f"cannot schedule {kind.name} at t={time}: clock is already at t={self.now}"
            )
        self._sequence += 1
        event = Event(time, self._sequence, kind, payload)
        heapq.heappush(self._heap, (time, self._sequence, event))
        return EventHandle(time, self._sequence)

    def cancel(self, handle: EventHandle) -> None:
        """Cancel a pending event; cancelled events are skipped silently."""
        if handle.sequence in self._cancelled:
            raise SchedulingError(f"event #{handle.sequence} was already cancelled")
        if handle.time < self.now or not any(
            seq == handle.sequence for _, seq, _ in self._heap
        ):
            raise SchedulingError(f"event #{handle.sequence} is not pending")
        self._cancelled.add(handle.sequence)

    def pending(self) -> int:
        """Number of events still queued (cancelled ones excluded)."""
        return sum(1 for _, seq, _ in self._heap if seq not in self._cancelled)

    def run_until(self, end: SimTime) -> int:
        """Process every event with time <= end, then advance the clock to `end`.

        Returns
        -------
        int
            Number of events processed.
        """
        if end < self.now:
            raise SchedulingError(f"cannot run until t={end}: clock is at t={self.now}")

        processed = 0
        while self._heap and self._heap[0][0] <= end:
            time, sequence, event = heapq.heappop(self._heap)
            if sequence in self._cancelled:
                self._cancelled.discard(sequence)
                continue
            self.now = time
            if self.trace is not None:
                self.trace.append((time, sequence, int(event.kind)))
            handler = self._handlers.get(event.kind)
            if handler is not None:
                handler(event)
            processed += 1

        self.now = end
        return processed


class RngStream(NamedTuple):
    """Identity of one independent random stream.

    `stream_id` is a tuple of small integers naming the owning entity, e.g.
    (STREAM_SENSOR, wban, index). Identical (seed, stream_id) pairs always yield
    identical draws, and the identity of one entity never depends on how many
    other entities exist.
    """

    seed: int
    stream_id: tuple[int, ...]

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
        return np.random.Generator(np.random.PCG64(sequence))


# Stream families
STREAM_COORDINATOR = 1
STREAM_SENSOR = 2
STREAM_IOT = 3
STREAM_MOBILITY = 4
STREAM_PLACEMENT = 5
STREAM_CHANNEL_CHOICE = 6
STREAM_SSA = 7


def make_rng(seed: int, *stream_id: int) -> np.random.Generator:
    """Shorthand for `RngStream(seed, stream_id).generator()`."""
    return RngStream(seed, tuple(stream_id)).generator()


def replication_seed(base_seed: int, replication: int) -> int:
    """Derive the seed of one replication from the sweep's base seed."""
    if replication < 0:
        raise ContractError(f"replication index must be >= 0, got {replication}")
    sequence = np.random.SeedSequence(base_seed, spawn_key=(replication,))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])
