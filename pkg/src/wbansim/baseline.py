"""SSA baseline: orthogonal channels for sensors in pairwise interference sets."""

from itertools import combinations
from typing import NamedTuple, Optional, Sequence

import networkx as nx
import numpy as np

from .engine import ContractError
from .protocol import SensorRef
from .spectrum import ChannelId, ChannelSet
from .world import RadioParams, World, received_power_dbm


class InterferenceSet(NamedTuple):
    """Sensors of two WBANs whose transmissions reach the other WBAN's coordinator."""

    wban_pair: tuple[int, int]
    members: tuple[SensorRef, ...]


class ChannelAssignment(NamedTuple):
    channels: dict[SensorRef, ChannelId]
    unprovisioned: frozenset[SensorRef]


def interference_level_dbm(radio: RadioParams) -> float:
    """Received power at which a sensor counts as interfering with a foreign coordinator."""
    return radio.noise_floor_dbm - radio.snr_threshold_db


def interference_set(
    world: World, a: int, b: int, radio: Optional[RadioParams] = None
) -> InterferenceSet:
    """Interference set of one WBAN pair; the argument order does not matter."""
    if a == b:
        raise ContractError(f"an interference set needs two distinct WBANs, got {a} twice")
    radio = radio or world.radio
    a, b = sorted((a, b))
    level = interference_level_dbm(radio)

    members = []
    for own, other in ((a, b), (b, a)):
        target = world.coordinators[other]
        for j, position in enumerate(world.sensor_positions(own)):
            if received_power_dbm(position, target, radio) >= level:
                members.append(SensorRef(own, j))
    return InterferenceSet((a, b), tuple(members))


def build_interference_sets(
    world: World, radio: Optional[RadioParams] = None
) -> list[InterferenceSet]:
    """Non-empty interference sets of every WBAN pair, in pair order."""
    sets = (
        interference_set(world, a, b, radio)
        for a, b in combinations(range(len(world.coordinators)), 2)
    )
    return [s for s in sets if s.members]


def conflict_graph(sets: Sequence[InterferenceSet]) -> nx.Graph:
    """Vertices are IS members; two sensors conflict when they share a set."""
    graph = nx.Graph()
    for interference in sets:
        graph.add_nodes_from(interference.members)
        graph.add_edges_from(combinations(interference.members, 2))
    return graph


def assign_orthogonal_channels(
    sets: Sequence[InterferenceSet], g: ChannelSet, rng: np.random.Generator
) -> ChannelAssignment:
    """Greedy coloring of the conflict graph with the channels of `g`.

    Vertices are colored in descending degree, ties by sensor id. Each takes the
    first channel, in a seeded preference order, that no colored neighbor
    uses. When every channel is taken the least-loaded one is reused and the
    sensor is unprovisioned.
    """
    if not g:
        raise ContractError("cannot assign channels from an empty channel set")
    graph = conflict_graph(sets)
    available = list(g)
    preference = [available[i] for i in rng.permutation(len(available))]

    channels: dict[SensorRef, ChannelId] = {}
    load = {c: 0 for c in preference}
    unprovisioned = set()
    for vertex in sorted(graph.nodes, key=lambda v: (-graph.degree[v], v)):
        used = {channels[n] for n in graph.neighbors(vertex) if n in channels}
        choice = next((c for c in preference if c not in used), None)
        if choice is None:
            choice = min(preference, key=lambda c: load[c])
            unprovisioned.add(vertex)
        channels[vertex] = choice
        load[choice] += 1
    return ChannelAssignment(channels, frozenset(unprovisioned))


def sets_containing(wban: int, sets: Sequence[InterferenceSet]) -> list[InterferenceSet]:
    return [s for s in sets if wban in s.wban_pair]


def channel_pressure(
    wban: int,
    sets: Sequence[InterferenceSet],
    assignment: ChannelAssignment,
    vicinity: ChannelSet,
) -> int:
    """Channels consumed around one WBAN.

    Vicinity channels and the channels assigned to members of every set
    containing the WBAN, plus one per unprovisioned member of those sets.
    """
    members = {m for s in sets_containing(wban, sets) for m in s.members}
    consumed = vicinity | ChannelSet.of(assignment.channels[m] for m in members)
    return len(consumed) + sum(1 for m in members if m in assignment.unprovisioned)


def wban_channels(
    wban: int, k_sensors: int, default_channel: ChannelId, assignment: ChannelAssignment
) -> ChannelSet:
    """Channels one SSA WBAN transmits on: its members' colors, plus the default if any sensor is left on it."""
    own = [assignment.channels[SensorRef(wban, j)] for j in range(k_sensors) if SensorRef(wban, j) in assignment.channels]
    channels = ChannelSet.of(own)
    if len(own) < k_sensors:
        channels = channels.add(default_channel)
    return channels
