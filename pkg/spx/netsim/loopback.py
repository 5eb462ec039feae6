"""Real-socket runner: the same endpoints over TCP on 127.0.0.1.

Every endpoint listens on its own ephemeral port. A connection starts with
one line naming its id, then carries encoded frames. Handlers run on the
event loop thread, one at a time, exactly as in the simulator; only the
clock and the transport differ. Flight ids in the recorded trace are read
batches, since a byte stream does not preserve the sender's grouping.
"""

import asyncio
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..endpoint import Endpoint, Flight
from ..exceptions import HandshakeTimeout
from ..wire import FrameReader, WireMessage, encode_all
from .network import Trace, TraceEvent

logger = logging.getLogger(__name__)

HOST = "127.0.0.1"


@dataclass
class LoopbackResult:
    trace: Trace
    wall_seconds: float
    cpu_seconds: Dict[str, float] = field(default_factory=dict)


class LoopbackRunner:
    """Drive endpoints over loopback TCP until every client has settled.

    Args:
        endpoints: participants; names must be unique
        timeout_s: wall-clock limit for the whole run
    """

    def __init__(self, endpoints: Sequence[Endpoint], timeout_s: float = 60.0):
        self.endpoints: Dict[str, Endpoint] = {}
        for endpoint in endpoints:
            if endpoint.name in self.endpoints:
                raise ValueError(f"duplicate endpoint name {endpoint.name!r}")
            self.endpoints[endpoint.name] = endpoint
        self.timeout_s = timeout_s
        self.trace = Trace()
        self.cpu_seconds: Dict[str, float] = {}
        self.connections: Dict[str, Tuple[str, str]] = {}
        self._ports: Dict[str, int] = {}
        self._writers: Dict[Tuple[str, str], asyncio.StreamWriter] = {}
        self._pending: Dict[Tuple[str, str], List[bytes]] = {}
        self._tasks: List[asyncio.Task] = []
        self._batches = 0
        self._started = 0
        self._t0 = 0.0
        self._loop: Optional[asyncio.AbstractEventLoop] = None
        self._settled: Optional[asyncio.Event] = None

    # NetContext

    @property
    def now(self) -> float:
        return (self._loop.time() - self._t0) * 1e6

    def open(self, src: str, dst: str) -> str:
        if dst not in self.endpoints:
            raise KeyError(f"no endpoint named {dst!r}")
        conn = f"{src}->{dst}#{len(self.connections) + 1}"
        self.connections[conn] = (src, dst)
        self._pending[(conn, src)] = []
        self._tasks.append(self._loop.create_task(self._dial(conn, src, dst)))
        return conn

    def set_timer(self, endpoint: str, delay_us: float, token: Any) -> None:
        self._loop.call_later(delay_us / 1e6, self._handle, endpoint, lambda e: e.on_timer(self, token))

    # Running

    def run(self) -> LoopbackResult:
        """Raises HandshakeTimeout when clients are still waiting at the deadline."""
        started = time.perf_counter()
        asyncio.run(self._main())
        return LoopbackResult(self.trace, time.perf_counter() - started, dict(self.cpu_seconds))

    async def _main(self) -> None:
        self._loop = asyncio.get_running_loop()
        self._settled = asyncio.Event()
        servers = []
        for name in self.endpoints:
            server = await asyncio.start_server(self._make_acceptor(name), HOST, 0)
            self._ports[name] = server.sockets[0].getsockname()[1]
            servers.append(server)
        self._t0 = self._loop.time()
        for name, endpoint in self.endpoints.items():
            self._loop.call_later(endpoint.start_at_us / 1e6, self._start, name)
        try:
            await asyncio.wait_for(self._settled.wait(), self.timeout_s)
        except asyncio.TimeoutError as exc:
            waiting = [n for n, e in self.endpoints.items() if e.is_waiting()]
            raise HandshakeTimeout(f"loopback run timed out with {', '.join(waiting)} waiting") from exc
        finally:
            for writer in self._writers.values():
                writer.close()
            for server in servers:
                server.close()
            for task in self._tasks:
                task.cancel()
            await asyncio.gather(*self._tasks, return_exceptions=True)
            for endpoint in self.endpoints.values():
                endpoint.close()

    def _start(self, name: str) -> None:
        self._started += 1
        self._handle(name, lambda e: e.start(self))

    def _check_settled(self) -> None:
        if self._started == len(self.endpoints) and not any(e.is_waiting() for e in self.endpoints.values()):
            self._settled.set()

    def _handle(self, name: str, call) -> None:
        endpoint = self.endpoints[name]
        began = time.process_time()
        flights = call(endpoint)
        self.cpu_seconds[name] = self.cpu_seconds.get(name, 0.0) + time.process_time() - began
        for flight in flights:
            self._send(name, flight)
        self._check_settled()

    def _send(self, sender: str, flight: Flight) -> None:
        if not flight.frames:
            return
        data = encode_all(flight.frames)
        writer = self._writers.get((flight.conn, sender))
        if writer is None:
            self._pending.setdefault((flight.conn, sender), []).append(data)
        else:
            writer.write(data)

    def _attach(self, conn: str, name: str, writer: asyncio.StreamWriter) -> None:
        self._writers[(conn, name)] = writer
        for data in self._pending.pop((conn, name), []):
            writer.write(data)

    async def _dial(self, conn: str, src: str, dst: str) -> None:
        reader, writer = await asyncio.open_connection(HOST, self._ports[dst])
        writer.write(f"{conn}\n".encode("utf-8"))
        self._attach(conn, src, writer)
        await self._pump(conn, reader, receiver=src, sender=dst)

    def _make_acceptor(self, name: str):
        async def accept(reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
            conn = (await reader.readline()).decode("utf-8").strip()
            if conn not in self.connections:
                writer.close()
                return
            self._attach(conn, name, writer)
            src, _ = self.connections[conn]
            await self._pump(conn, reader, receiver=name, sender=src)

        return accept

    async def _pump(self, conn: str, reader: asyncio.StreamReader, receiver: str, sender: str) -> None:
        frames_in = FrameReader()
        while True:
            data = await reader.read(1 << 16)
            if not data:
                return
            frames = frames_in.feed(data)
            if frames:
                self._deliver(conn, sender, receiver, frames)

    def _deliver(self, conn: str, sender: str, receiver: str, frames: List[WireMessage]) -> None:
        self._batches += 1
        now = self.now
        events = []
        for msg in frames:
            event = TraceEvent(len(self.trace.events), now, conn, sender, receiver, self._batches, msg, msg.size)
            self.trace.events.append(event)
            events.append(event)
        for watcher in self.endpoints.values():
            if watcher.observes_links:
                for event in events:
                    watcher.observe(event)
        self._handle(receiver, lambda e: e.on_flight(self, conn, frames))


def run_loopback(endpoints: Sequence[Endpoint], timeout_s: float = 60.0) -> LoopbackResult:
    runner = LoopbackRunner(endpoints, timeout_s)
    result = runner.run()
    logger.info(f"loopback run: {len(result.trace)} frames in {result.wall_seconds * 1e3:.1f} ms")
    return result
