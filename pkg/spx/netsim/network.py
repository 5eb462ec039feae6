"""Discrete-event network: virtual time, latency links and frame traces."""

import heapq
import json
import logging
import time
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..crypto_core import Entropy
from ..crypto_core import hash as sha256
from ..endpoint import Endpoint, Flight
from ..exceptions import ConfigError, Deadlock
from ..wire import WireMessage

logger = logging.getLogger(__name__)

TRACE_SCHEMA = "spx-trace/1"


class Topology:
    """One-way link latencies between named endpoints, in microseconds.

    Links are symmetric. Pairs without an explicit latency use
    ``default_latency_us``.
    """

    def __init__(self, default_latency_us: float = 0.0, jitter_us: float = 0.0):
        if default_latency_us < 0 or jitter_us < 0:
            raise ConfigError("latencies must be non-negative")
        self.default_latency_us = default_latency_us
        self.jitter_us = jitter_us
        self._latency: Dict[FrozenSet[str], float] = {}

    def set_latency(self, a: str, b: str, latency_us: float) -> "Topology":
        if latency_us < 0:
            raise ConfigError(f"latency {a}<->{b} must be non-negative, got {latency_us}")
        self._latency[frozenset((a, b))] = float(latency_us)
        return self

    def latency(self, a: str, b: str) -> float:
        return self._latency.get(frozenset((a, b)), self.default_latency_us)

    def alias(self, name: str, like: str) -> "Topology":
        """Give ``name`` the same links as ``like`` (an adversary standing in for it)."""
        for pair, us in list(self._latency.items()):
            if like in pair:
                other = next(iter(pair - {like}), like)
                if other != name:
                    self._latency[frozenset((name, other))] = us
        return self

    @property
    def links(self) -> Dict[Tuple[str, ...], float]:
        return {tuple(sorted(pair)): us for pair, us in self._latency.items()}


@dataclass(frozen=True)
class TraceEvent:
    """One delivered frame."""

    seq: int
    time_us: float
    conn: str
    src: str
    dst: str
    flight_id: int
    msg: WireMessage
    byte_count: int

    @property
    def link(self) -> str:
        return f"{self.src}->{self.dst}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seq": self.seq,
            "time_us": round(self.time_us, 3),
            "conn": self.conn,
            "src": self.src,
            "dst": self.dst,
            "flight": self.flight_id,
            "type": self.msg.msg_type.name,
            "tag": int(self.msg.msg_type),
            "spx": self.msg.is_spx_internal,
            "bytes": self.byte_count,
            "payload_sha256": sha256(self.msg.payload).hex(),
        }


class Trace:
    """Ordered delivery record of one run."""

    def __init__(self, events: Optional[List[TraceEvent]] = None, meta: Optional[Dict[str, Any]] = None):
        self.events: List[TraceEvent] = events or []
        self.meta = meta or {}

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def between(self, a: str, b: str) -> List[TraceEvent]:
        return [e for e in self.events if {e.src, e.dst} == {a, b}]

    def seen_by(self, endpoint: str, conn: Optional[str] = None) -> List[TraceEvent]:
        return [e for e in self.events if e.dst == endpoint and (conn is None or e.conn == conn)]

    def header(self) -> Dict[str, Any]:
        return {"schema": TRACE_SCHEMA, **self.meta, "events": len(self.events)}

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header(), sort_keys=True)]
        lines.extend(json.dumps(e.to_dict(), sort_keys=True) for e in self.events)
        return "\n".join(lines) + "\n"

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(self.to_jsonl(), encoding="utf-8")
        return path


class _Kind(IntEnum):
    START = 0
    DELIVER = 1
    TIMER = 2


class Network:
    """Single-threaded discrete-event runner for :class:`Endpoint` objects.

    Delivery is FIFO per connection and direction. Each endpoint handles one
    event at a time and is busy for its ``compute_cost_us`` after each, so a
    zero-latency run measures serialized processing only.

    Args:
        topology: link latencies
        entropy: seeds the optional latency jitter
        max_events: safety limit on processed events
    """

    def __init__(self, topology: Optional[Topology] = None, entropy: Optional[Entropy] = None, max_events: int = 5_000_000):
        self.topology = topology or Topology()
        self.max_events = max_events
        seed = entropy.spawn("jitter").seed if entropy is not None else None
        self._rng = np.random.default_rng(seed)
        self.endpoints: Dict[str, Endpoint] = {}
        self.connections: Dict[str, Tuple[str, str]] = {}
        self.trace = Trace()
        self._now = 0.0
        self._queue: List[Tuple[float, int, int, Any]] = []
        self._seq = 0
        self._flight_seq = 0
        self._busy_until: Dict[str, float] = {}
        self._last_arrival: Dict[Tuple[str, str], float] = {}
        self.cpu_seconds: Dict[str, float] = {}

    # NetContext

    @property
    def now(self) -> float:
        return self._now

    def open(self, src: str, dst: str) -> str:
        if dst not in self.endpoints:
            raise KeyError(f"no endpoint named {dst!r}")
        conn = f"{src}->{dst}#{len(self.connections) + 1}"
        self.connections[conn] = (src, dst)
        logger.debug(f"open {conn}")
        return conn

    def set_timer(self, endpoint: str, delay_us: float, token: Any) -> None:
        self._push(self._now + delay_us, _Kind.TIMER, (endpoint, token))

    # Setup

    def add(self, endpoint: Endpoint) -> Endpoint:
        if endpoint.name in self.endpoints:
            raise ValueError(f"duplicate endpoint name {endpoint.name!r}")
        self.endpoints[endpoint.name] = endpoint
        self._busy_until[endpoint.name] = 0.0
        self._push(endpoint.start_at_us, _Kind.START, endpoint.name)
        return endpoint

    def add_all(self, endpoints: Iterable[Endpoint]) -> None:
        for endpoint in endpoints:
            self.add(endpoint)

    # Running

    def _push(self, time_us: float, kind: _Kind, payload: Any) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (time_us, self._seq, int(kind), payload))

    def _peer(self, conn: str, sender: str) -> str:
        src, dst = self.connections[conn]
        return dst if sender == src else src

    def _dispatch(self, sender: str, flights: Sequence[Flight], depart_us: float) -> None:
        for flight in flights:
            if not flight.frames:
                continue
            receiver = self._peer(flight.conn, sender)
            latency = self.topology.latency(sender, receiver)
            if self.topology.jitter_us:
                latency += float(self._rng.uniform(0.0, self.topology.jitter_us))
            key = (flight.conn, sender)
            arrival = max(depart_us + latency, self._last_arrival.get(key, 0.0))
            self._last_arrival[key] = arrival
            self._flight_seq += 1
            self._push(arrival, _Kind.DELIVER, (flight.conn, sender, receiver, self._flight_seq, flight.frames))

    def run(self, raise_on_deadlock: bool = True) -> Trace:
        """Process events until the queue drains.

        Raises:
            Deadlock: the queue drained while an endpoint still waits for traffic
        """
        processed = 0
        while self._queue:
            time_us, seq, kind, payload = heapq.heappop(self._queue)
            name = payload if kind == _Kind.START else payload[0] if kind == _Kind.TIMER else payload[2]
            ready = self._busy_until[name]
            if ready > time_us:
                # Keep the original sequence number so per-link FIFO order survives.
                heapq.heappush(self._queue, (ready, seq, kind, payload))
                continue
            self._now = time_us
            processed += 1
            if processed > self.max_events:
                raise Deadlock(f"event limit {self.max_events} exceeded")
            endpoint = self.endpoints[name]
            started = time.process_time()
            if kind == _Kind.START:
                flights = endpoint.start(self)
            elif kind == _Kind.TIMER:
                flights = endpoint.on_timer(self, payload[1])
            else:
                flights = self._deliver(endpoint, payload)
            self.cpu_seconds[name] = self.cpu_seconds.get(name, 0.0) + time.process_time() - started
            done = time_us + endpoint.compute_cost_us
            self._busy_until[name] = done
            self._dispatch(name, flights, done)

        waiting = [n for n, e in self.endpoints.items() if e.is_waiting()]
        for endpoint in self.endpoints.values():
            endpoint.close()
        if waiting:
            message = f"no events left but {', '.join(waiting)} still waiting"
            if raise_on_deadlock:
                raise Deadlock(message)
            logger.warning(message)
        return self.trace

    def _deliver(self, endpoint: Endpoint, payload) -> List[Flight]:
        conn, sender, receiver, flight_id, frames = payload
        events = []
        for msg in frames:
            event = TraceEvent(
                seq=len(self.trace.events),
                time_us=self._now,
                conn=conn,
                src=sender,
                dst=receiver,
                flight_id=flight_id,
                msg=msg,
                byte_count=msg.size,
            )
            self.trace.events.append(event)
            events.append(event)
        for watcher in self.endpoints.values():
            if watcher.observes_links:
                for event in events:
                    watcher.observe(event)
        return endpoint.on_flight(self, conn, frames)
