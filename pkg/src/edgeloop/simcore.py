"""Deterministic discrete-event kernel for cloud-edge control topologies.

Time is integer milliseconds. Events are totally ordered by (time, seq),
where seq is a monotone counter issued at scheduling time, so simultaneous
events replay in scheduling order and runs are bit-reproducible for a
fixed topology, seed, and initial schedule.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable

import numpy as np

MS_PER_SECOND = 1000
CONTROL_PERIOD_MS = 5 * MS_PER_SECOND  # control cadence: one command every 5 s

PAYLOAD_KINDS = frozenset(
    {"sensor-reading", "control-command", "state-report", "allocation-update"}
)


class SimulationError(Exception):
    """Base class for kernel errors."""


class StaleEventError(SimulationError):
    """Raised when an event is scheduled before the current clock."""


class TopologyError(SimulationError):
    """Raised for unknown nodes or missing links."""


class SimulationDrained(SimulationError):
    """Raised by step() when the event queue is empty."""


class NodeKind(str, Enum):
    SENSOR = "sensor"
    EDGE_SERVER = "edge-server"
    CLOUD_CENTER = "cloud-center"


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    # sensors must name their home edge server; other kinds leave this unset
    attached_to: int | None = None


@dataclass(frozen=True)
class Link:
    """Directed link with a base delay and an optional jitter fraction.

    A delivered delay is drawn uniformly from the integer range
    [ceil(base*(1-jitter)), floor(base*(1+jitter))]; with jitter 0 the
    delay is exactly the base.
    """

    base_ms: int
    jitter: float = 0.0

    def __post_init__(self):
        if self.base_ms <= 0:
            raise TopologyError(f"link base delay must be positive, got {self.base_ms}")
        if not (0.0 <= self.jitter < 1.0):
            raise TopologyError(f"link jitter must be in [0, 1), got {self.jitter}")

    @property
    def min_delay_ms(self) -> int:
        return math.ceil(self.base_ms * (1.0 - self.jitter))

    @property
    def max_delay_ms(self) -> int:
        return math.floor(self.base_ms * (1.0 + self.jitter))

    def sample_delay_ms(self, rng: np.random.Generator | None) -> int:
        if self.jitter == 0.0:
            return self.base_ms
        if rng is None:
            raise SimulationError("jittered link requires the kernel to own an rng")
        return int(rng.integers(self.min_delay_ms, self.max_delay_ms + 1))


@dataclass(frozen=True)
class Event:
    time: int
    seq: int
    target: int
    kind: str
    body: Any = None


@dataclass
class Topology:
    """Node and link registry with layer invariants enforced on build."""

    nodes: dict[int, Node] = field(default_factory=dict)
    links: dict[tuple[int, int], Link] = field(default_factory=dict)

    def add_node(self, node: Node) -> Node:
        if node.id in self.nodes:
            raise TopologyError(f"duplicate node id {node.id}")
        self.nodes[node.id] = node
        return node

    def add_link(self, src: int, dst: int, base_ms: int, jitter: float = 0.0) -> Link:
        if src not in self.nodes or dst not in self.nodes:
            raise TopologyError(f"link endpoints must exist: {src} -> {dst}")
        if src == dst:
            raise TopologyError("self links are not allowed; use schedule() instead")
        link = Link(base_ms=base_ms, jitter=jitter)
        self.links[(src, dst)] = link
        return link

    def validate(self) -> None:
        clouds = [n for n in self.nodes.values() if n.kind is NodeKind.CLOUD_CENTER]
        if len(clouds) != 1:
            raise TopologyError(f"expected exactly one cloud-center, found {len(clouds)}")
        for node in self.nodes.values():
            if node.kind is NodeKind.SENSOR:
                home = self.nodes.get(node.attached_to) if node.attached_to is not None else None
                if home is None or home.kind is not NodeKind.EDGE_SERVER:
                    raise TopologyError(
                        f"sensor {node.id} must be attached to exactly one edge-server"
                    )

    def link(self, src: int, dst: int) -> Link:
        if src not in self.nodes:
            raise TopologyError(f"unknown node {src}")
        if dst not in self.nodes:
            raise TopologyError(f"unknown node {dst}")
        link = self.links.get((src, dst))
        if link is None:
            raise TopologyError(f"no link from {src} to {dst}")
        return link


# A handler maps a delivered event to outgoing messages. Handlers own their
# node state; the kernel owns time, ordering, and delivery.
@dataclass(frozen=True)
class Outgoing:
    dst: int
    kind: str
    body: Any = None
    # extra departure delay before the link delay applies, e.g. compute time
    depart_delay_ms: int = 0


Handler = Callable[[Event], Iterable[Outgoing] | None]


class Kernel:
    """Single-stream event kernel. One instance per simulation run."""

    def __init__(
        self,
        topology: Topology,
        rng: np.random.Generator | None = None,
        record_trace: bool = False,
    ):
        topology.validate()
        self.topology = topology
        self.rng = rng
        self.clock = 0
        self._seq = 0
        self._queue: list[tuple[int, int, Event]] = []
        self._handlers: dict[int, Handler] = {}
        self.sent_count = 0
        self.delivered_count = 0
        self.trace: list[tuple[int, int, int, str]] | None = [] if record_trace else None

    def register_handler(self, node_id: int, handler: Handler) -> None:
        if node_id not in self.topology.nodes:
            raise TopologyError(f"unknown node {node_id}")
        self._handlers[node_id] = handler

    def queue_length(self) -> int:
        return len(self._queue)

    def schedule(self, time: int, target: int, kind: str, body: Any = None) -> Event:
        if time < self.clock:
            raise StaleEventError(f"cannot schedule at t={time} before clock {self.clock}")
        if target not in self.topology.nodes:
            raise TopologyError(f"unknown node {target}")
        if kind not in PAYLOAD_KINDS:
            raise SimulationError(f"unknown payload kind {kind!r}")
        event = Event(time=time, seq=self._seq, target=target, kind=kind, body=body)
        self._seq += 1
        heapq.heappush(self._queue, (event.time, event.seq, event))
        return event

    def send(
        self,
        src: int,
        dst: int,
        kind: str,
        body: Any = None,
        depart_delay_ms: int = 0,
    ) -> Event:
        """Schedule delivery of a payload over the src->dst link.

        The delivery time is now + depart_delay_ms + sampled link delay.
        """
        link = self.topology.link(src, dst)
        delay = link.sample_delay_ms(self.rng)
        event = self.schedule(self.clock + depart_delay_ms + delay, dst, kind, body)
        self.sent_count += 1
        return event

    def step(self) -> Event:
        """Process the next event: advance the clock and dispatch it."""
        if not self._queue:
            raise SimulationDrained("event queue is empty")
        _, _, event = heapq.heappop(self._queue)
        self.clock = event.time
        self.delivered_count += 1
        if self.trace is not None:
            self.trace.append((event.time, event.seq, event.target, event.kind))
        handler = self._handlers.get(event.target)
        if handler is not None:
            outgoing = handler(event)
            if outgoing:
                for msg in outgoing:
                    self.send(
                        event.target,
                        msg.dst,
                        msg.kind,
                        msg.body,
                        depart_delay_ms=msg.depart_delay_ms,
                    )
        return event

    def run_until(self, t: int) -> int:
        """Process every event with time <= t; returns the processed count.

        The clock only advances through event processing, so it ends at the
        last processed event's time (or stays put when nothing is due).
        """
        count = 0
        while self._queue and self._queue[0][0] <= t:
            self.step()
            count += 1
        return count

    def run(self) -> int:
        """Drain the queue completely; returns the processed count."""
        count = 0
        while self._queue:
            self.step()
            count += 1
        return count
