"""Deterministic virtual-time network with byte-exact traffic accounting.

Envelopes are delivered after a per-link one-way latency (plus an optional
per-link serialization delay when a finite bandwidth is configured). Every
sent byte is recorded in a TrafficLedger bucketed by (link class, message
kind). A single event loop owns all state; ties break by insertion order.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import math
import random
from dataclasses import dataclass

from .wire import Envelope, MessageKind

LATENCY_RANGE_MS = (20.0, 300.0)


class NoRoute(Exception):
    """Sender and receiver are not directly linked."""


class TimeLimitExceeded(Exception):
    """Events remained in the queue at the configured time limit."""


class UnknownEndpoint(KeyError):
    pass


class EndpointKind(enum.Enum):
    CLIENT = "CLIENT"
    NODE = "NODE"
    SERVER = "SERVER"


class LinkClass(enum.Enum):
    CLIENT_NODE = "client_node"
    NODE_NODE = "node_node"
    NODE_SERVER = "node_server"
    CLIENT_SERVER = "client_server"


_CLASS_BY_KINDS = {
    frozenset({EndpointKind.CLIENT, EndpointKind.NODE}): LinkClass.CLIENT_NODE,
    frozenset({EndpointKind.NODE}): LinkClass.NODE_NODE,
    frozenset({EndpointKind.NODE, EndpointKind.SERVER}): LinkClass.NODE_SERVER,
    frozenset({EndpointKind.CLIENT, EndpointKind.SERVER}): LinkClass.CLIENT_SERVER,
}


@dataclass(frozen=True, slots=True)
class Endpoint:
    id: str
    kind: EndpointKind


@dataclass(frozen=True, slots=True)
class Link:
    a: str
    b: str
    latency_ms: float
    link_class: LinkClass
    bandwidth_bytes_per_ms: float | None = None


def link_class_of(kind_a: EndpointKind, kind_b: EndpointKind) -> LinkClass:
    try:
        return _CLASS_BY_KINDS[frozenset({kind_a, kind_b})]
    except KeyError:
        raise NoRoute(f"no link class for {kind_a.value}-{kind_b.value}")


class Topology:
    """Endpoints plus direct links; no routing beyond one hop."""

    def __init__(self):
        self.endpoints: dict[str, Endpoint] = {}
        self.links: dict[tuple[str, str], Link] = {}

    def add_endpoint(self, endpoint: Endpoint) -> None:
        if endpoint.id in self.endpoints:
            raise ValueError(f"duplicate endpoint id: {endpoint.id}")
        self.endpoints[endpoint.id] = endpoint

    def add_link(self, a: str, b: str, latency_ms: float,
                 bandwidth_bytes_per_ms: float | None = None) -> Link:
        ka, kb = self.endpoints[a].kind, self.endpoints[b].kind
        link = Link(*sorted((a, b)), latency_ms=latency_ms,
                    link_class=link_class_of(ka, kb),
                    bandwidth_bytes_per_ms=bandwidth_bytes_per_ms)
        self.links[(link.a, link.b)] = link
        return link

    def link_between(self, a: str, b: str) -> Link | None:
        return self.links.get(tuple(sorted((a, b))))

    def node_ids(self) -> list[str]:
        return sorted(e.id for e in self.endpoints.values() if e.kind is EndpointKind.NODE)

    def neighbors_of(self, endpoint_id: str, kind: EndpointKind | None = None) -> list[str]:
        out = []
        for link in self.links.values():
            other = None
            if link.a == endpoint_id:
                other = link.b
            elif link.b == endpoint_id:
                other = link.a
            if other is not None and (kind is None or self.endpoints[other].kind is kind):
                out.append(other)
        return sorted(out)

    def max_latency_ms(self) -> float:
        return max((l.latency_ms for l in self.links.values()), default=0.0)


def _link_latency(seed: int, a: str, b: str) -> float:
    """Uniform draw from [20, 300] ms, seeded by (seed, ordered endpoint pair)."""
    a, b = sorted((a, b))
    digest = hashlib.sha256(f"{seed}|{a}|{b}".encode("utf-8")).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    return rng.uniform(*LATENCY_RANGE_MS)


def build_topology(n_nodes: int, seed: int, with_server: bool = False,
                   bandwidth_bytes_per_ms: float | None = None,
                   client_id: str = "client", server_id: str = "server") -> Topology:
    """Full node mesh plus one client linked to every node (and to the server
    when present); link latencies are drawn deterministically from the seed."""
    topo = Topology()
    node_ids = [f"node-{i:02d}" for i in range(n_nodes)]
    for node_id in node_ids:
        topo.add_endpoint(Endpoint(node_id, EndpointKind.NODE))
    topo.add_endpoint(Endpoint(client_id, EndpointKind.CLIENT))
    if with_server:
        topo.add_endpoint(Endpoint(server_id, EndpointKind.SERVER))

    def connect(a: str, b: str) -> None:
        topo.add_link(a, b, _link_latency(seed, a, b), bandwidth_bytes_per_ms)

    for i, a in enumerate(node_ids):
        for b in node_ids[i + 1:]:
            connect(a, b)
    for node_id in node_ids:
        connect(client_id, node_id)
        if with_server:
            connect(node_id, server_id)
    if with_server:
        connect(client_id, server_id)
    return topo


class TrafficLedger:
    """Cumulative sent bytes per (link class, message kind)."""

    def __init__(self):
        self.bytes: dict[tuple[LinkClass, MessageKind], int] = {}

    def add(self, link_class: LinkClass, kind: MessageKind, n: int) -> None:
        key = (link_class, kind)
        self.bytes[key] = self.bytes.get(key, 0) + n

    def get(self, link_class: LinkClass, kind: MessageKind) -> int:
        return self.bytes.get((link_class, kind), 0)

    def by_class(self) -> dict[LinkClass, int]:
        out: dict[LinkClass, int] = {}
        for (link_class, _), n in self.bytes.items():
            out[link_class] = out.get(link_class, 0) + n
        return out

    def total(self) -> int:
        return sum(self.bytes.values())

    def to_csv(self) -> str:
        lines = ["link_class,message_kind,bytes"]
        for (link_class, kind), n in sorted(
            self.bytes.items(), key=lambda kv: (kv[0][0].value, kv[0][1].name)
        ):
            lines.append(f"{link_class.value},{kind.name},{n}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, slots=True)
class DeliveryEvent:
    envelope: Envelope
    sent_at: float
    deliver_at: float
    link_class: LinkClass


@dataclass(slots=True)
class LogEntry:
    """One envelope transmission as observed on its link."""

    sent_at: float
    deliver_at: float
    link_class: LinkClass
    envelope: Envelope
    delivered: bool = True


class Network:
    """Single-threaded discrete-event simulator over a fixed topology."""

    def __init__(self, topology: Topology):
        self.topology = topology
        self.clock = 0.0
        self.ledger = TrafficLedger()
        self.envelope_log: list[LogEntry] = []
        self._queue: list[tuple[float, int, object]] = []
        self._seq = 0
        self._handlers: dict[str, object] = {}
        self._available: dict[str, bool] = {e: True for e in topology.endpoints}
        # Per-direction time at which a link finishes serializing its last send.
        self._link_busy_until: dict[tuple[str, str], float] = {}

    # -- wiring ------------------------------------------------------------

    def register(self, endpoint_id: str, handler) -> None:
        """handler(net, envelope, now) is invoked on each delivery."""
        if endpoint_id not in self.topology.endpoints:
            raise UnknownEndpoint(endpoint_id)
        self._handlers[endpoint_id] = handler

    def set_available(self, endpoint_id: str, available: bool) -> None:
        if endpoint_id not in self.topology.endpoints:
            raise UnknownEndpoint(endpoint_id)
        self._available[endpoint_id] = available

    def is_available(self, endpoint_id: str) -> bool:
        return self._available[endpoint_id]

    # -- scheduling --------------------------------------------------------

    def call_at(self, at: float, fn) -> None:
        """Schedule fn(net, now); ties with equal time run in insertion order."""
        self._push(at, fn)

    def send(self, env: Envelope, at: float) -> DeliveryEvent | None:
        """Schedule delivery of env and account its bytes on the link.

        Returns None when the sender is currently unavailable (a down node
        transmits nothing). Raises NoRoute when the endpoints are unlinked.
        """
        link = self.topology.link_between(env.sender, env.receiver)
        if link is None:
            raise NoRoute(f"{env.sender} -> {env.receiver}")
        if not self._available[env.sender]:
            return None
        depart = at
        if link.bandwidth_bytes_per_ms:
            direction = (env.sender, env.receiver)
            start = max(at, self._link_busy_until.get(direction, 0.0))
            depart = start + env.wire_size / link.bandwidth_bytes_per_ms
            self._link_busy_until[direction] = depart
        deliver_at = depart + link.latency_ms
        self.ledger.add(link.link_class, env.kind, env.wire_size)
        entry = LogEntry(sent_at=at, deliver_at=deliver_at,
                         link_class=link.link_class, envelope=env)
        self.envelope_log.append(entry)
        self._push(deliver_at, (env, entry))
        return DeliveryEvent(env, at, deliver_at, link.link_class)

    def _push(self, at: float, item) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (at, self._seq, item))

    # -- event loop --------------------------------------------------------

    def run_until_quiescent(self, limit: float = math.inf) -> float:
        """Process events in (time, insertion) order until the queue empties.

        Raises TimeLimitExceeded when events would remain beyond `limit`.
        """
        while self._queue:
            if self._queue[0][0] > limit:
                raise TimeLimitExceeded(f"events pending beyond t={limit}")
            at, _, item = heapq.heappop(self._queue)
            self.clock = max(self.clock, at)
            if isinstance(item, tuple):
                env, entry = item
                if not self._available[env.receiver]:
                    entry.delivered = False
                    continue
                handler = self._handlers.get(env.receiver)
                if handler is not None:
                    handler(self, env, at)
            else:
                item(self, at)
        return self.clock

    def reset_ledger(self) -> TrafficLedger:
        """Swap in a fresh ledger (and log segment); returns the old ledger."""
        old = self.ledger
        self.ledger = TrafficLedger()
        self.envelope_log = []
        return old
