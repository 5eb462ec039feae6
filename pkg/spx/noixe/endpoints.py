"""NoiXe network endpoints: client, echo server and the split proxy baseline."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from ..crypto_core import Entropy, KeyPair
from ..endpoint import Endpoint, Flight, NetContext, OutcomeStatus, abort_frame, batch
from ..exceptions import ProtocolViolation, SpxError
from ..see_sim import SpxSession
from ..spx_core import PlaintextObserver, SpxServerPolicy
from ..wire import Direction, MsgType, WireMessage
from ..workload import EchoClient, Workload
from .adapter import protocol_id
from .handshake import MAX_MESSAGE
from .patterns import HandshakePattern
from .session import NoiseInitiator, NoiseResponder, record_size

logger = logging.getLogger(__name__)


class NoiseClient(EchoClient):
    """Unmodified NoiXe client running an echo workload."""

    def __init__(
        self,
        name: str,
        peer: str,
        entropy: Entropy,
        pattern: HandshakePattern,
        remote_static: Optional[bytes] = None,
        pin: Optional[bytes] = None,
        static: Optional[KeyPair] = None,
        workload: Optional[Workload] = None,
        max_message: int = MAX_MESSAGE,
        start_at_us: float = 0.0,
        timeout_us: Optional[float] = None,
        compute_cost_us: float = 0.0,
    ):
        super().__init__(
            name,
            peer,
            entropy,
            workload=workload,
            record_size=record_size(max_message),
            start_at_us=start_at_us,
            timeout_us=timeout_us,
            compute_cost_us=compute_cost_us,
        )
        self.session = NoiseInitiator(
            pattern,
            entropy.spawn("handshake"),
            static=static,
            remote_static=remote_static,
            pin=pin,
            max_message=max_message,
        )

    def handshake_start(self) -> List[WireMessage]:
        return self.session.start()

    def handshake_receive(self, msg: WireMessage) -> List[WireMessage]:
        return self.session.receive(msg)

    @property
    def handshake_established(self) -> bool:
        return self.session.established

    def session_key_bytes(self) -> bytes:
        return self.session.session_key_bytes()

    def seal_record(self, data: bytes) -> WireMessage:
        return self.session.transport.seal(data)

    def open_record(self, msg: WireMessage) -> bytes:
        return self.session.transport.open(msg.payload)


class NoiseServer(Endpoint):
    """NoiXe echo server speaking one pattern with a fixed static key.

    Args:
        name: endpoint name
        entropy: randomness for ephemeral keys
        pattern: the pattern this server accepts
        static: Noise static key pair
        spx_policy: SPX server policy; ``None`` answers "Not Capable"
    """

    role = "server"

    def __init__(
        self,
        name: str,
        entropy: Entropy,
        pattern: HandshakePattern,
        static: KeyPair,
        spx_policy: Optional[SpxServerPolicy] = None,
        max_message: int = MAX_MESSAGE,
        compute_cost_us: float = 0.0,
    ):
        super().__init__(name, compute_cost_us=compute_cost_us)
        self.entropy = entropy
        self.pattern = pattern
        self.static = static
        self.spx_policy = spx_policy
        self.max_message = max_message
        self.sessions: Dict[str, NoiseResponder] = {}

    def _session_for(self, net: NetContext, conn: str) -> NoiseResponder:
        if conn not in self.sessions:
            self.sessions[conn] = NoiseResponder(
                self.pattern,
                self.entropy.spawn(f"conn/{len(self.sessions) + 1}"),
                self.static,
                spx_policy=self.spx_policy,
                max_message=self.max_message,
            )
            outcome = self.outcome(conn)
            outcome.started_us = net.now
            outcome.protocol = protocol_id(self.pattern)
        return self.sessions[conn]

    def on_message(self, net: NetContext, conn: str, msg: WireMessage) -> List[Flight]:
        outcome = self.outcome(conn)
        if outcome.status is OutcomeStatus.ABORTED:
            return []
        if msg.msg_type is MsgType.ABORT:
            outcome.abort(f"peer aborted: {msg.payload.decode('utf-8', 'replace')}")
            self._close(conn)
            return []
        try:
            if self.spx_policy is not None and self.spx_policy.handles_registration(conn, msg):
                return [Flight.of(conn, *self.spx_policy.on_registration(conn, msg))]
            session = self._session_for(net, conn)
            if msg.msg_type is MsgType.APPLICATION_DATA:
                return self._echo(conn, session, msg)
            was_established = session.established
            reply = session.receive(msg)
        except SpxError as exc:
            reason = f"{type(exc).__name__}: {exc}"
            logger.warning(f"[{self.name}] aborting {conn}: {reason}")
            outcome.abort(reason)
            self._close(conn)
            return [Flight.of(conn, abort_frame(reason))]
        if session.established and not was_established:
            outcome.status = OutcomeStatus.ESTABLISHED
            outcome.handshake_us = net.now - outcome.started_us
            outcome.session_key = session.session_key_bytes()
        return [Flight.of(conn, *reply)]

    def _echo(self, conn: str, session: NoiseResponder, msg: WireMessage) -> List[Flight]:
        if not session.established:
            raise ProtocolViolation("transport message before the handshake completed")
        data = session.transport.open(msg.payload)
        self.outcome(conn).bytes_transferred += len(data)
        return [Flight.of(conn, session.transport.seal(data))]

    def _close(self, conn: str) -> None:
        session = self.sessions.get(conn)
        if session is not None:
            session.close()
        if self.spx_policy is not None:
            self.spx_policy.forget(conn)

    def close(self) -> None:
        for conn in self.outcomes:
            self._close(conn)


@dataclass
class _SplitConnection:
    client_conn: str
    upstream_conn: str
    downstream: NoiseResponder
    upstream: NoiseInitiator
    session: Optional[SpxSession] = None
    pending: List[bytes] = field(default_factory=list)


class NoiseSplitProxy(Endpoint):
    """Split baseline for NoiXe: the edge runs its own responder.

    Clients must know the edge's static key in place of the server's. The
    edge opens a separate Noise session to the server and re-encrypts
    transport messages between the two.
    """

    role = "edge"

    def __init__(
        self,
        name: str,
        server: str,
        entropy: Entropy,
        pattern: HandshakePattern,
        static: KeyPair,
        server_static: Optional[bytes] = None,
        max_message: int = MAX_MESSAGE,
        on_plaintext=None,
        compute_cost_us: float = 0.0,
    ):
        super().__init__(name, compute_cost_us=compute_cost_us)
        self.server = server
        self.entropy = entropy
        self.pattern = pattern
        self.static = static
        self.server_static = server_static
        self.max_message = max_message
        self.on_plaintext = on_plaintext or PlaintextObserver()
        self.connections: Dict[str, _SplitConnection] = {}
        self._client_of: Dict[str, str] = {}

    def on_flight(self, net: NetContext, conn: str, frames) -> List[Flight]:
        client_conn = self._client_of.get(conn, conn)
        try:
            return super().on_flight(net, conn, frames)
        except SpxError as exc:
            reason = f"{type(exc).__name__}: {exc}"
            logger.warning(f"[{self.name}] aborting {client_conn}: {reason}")
            self.outcome(client_conn).abort(reason)
            flights = [Flight.of(client_conn, abort_frame(reason))]
            split = self.connections.get(client_conn)
            if split is not None:
                flights.append(Flight.of(split.upstream_conn, abort_frame(reason)))
            return flights

    def on_message(self, net: NetContext, conn: str, msg: WireMessage) -> List[Flight]:
        if conn in self._client_of:
            return self._from_server(self.connections[self._client_of[conn]], msg)
        split = self.connections.get(conn)
        flights: List[Flight] = []
        if split is None:
            split, flights = self._open(net, conn)
        return batch(flights + self._from_client(net, split, msg))

    def _open(self, net: NetContext, client_conn: str):
        index = len(self.connections) + 1
        upstream_conn = net.open(self.name, self.server)
        split = _SplitConnection(
            client_conn=client_conn,
            upstream_conn=upstream_conn,
            downstream=NoiseResponder(
                self.pattern, self.entropy.spawn(f"down/{index}"), self.static, max_message=self.max_message
            ),
            upstream=NoiseInitiator(
                self.pattern,
                self.entropy.spawn(f"up/{index}"),
                remote_static=self.server_static if self.pattern.needs_responder_static else None,
                pin=self.server_static,
                max_message=self.max_message,
            ),
        )
        self.connections[client_conn] = split
        self._client_of[upstream_conn] = client_conn
        outcome = self.outcome(client_conn)
        outcome.started_us = net.now
        outcome.protocol = protocol_id(self.pattern)
        return split, [Flight.of(upstream_conn, *split.upstream.start())]

    def _from_client(self, net: NetContext, split: _SplitConnection, msg: WireMessage) -> List[Flight]:
        outcome = self.outcome(split.client_conn)
        if msg.msg_type is MsgType.ABORT:
            outcome.abort("client aborted")
            return [Flight.of(split.upstream_conn, msg)]
        if msg.msg_type is MsgType.APPLICATION_DATA:
            if not split.downstream.established:
                raise ProtocolViolation("transport message before the handshake completed")
            data = split.downstream.transport.open(msg.payload)
            outcome.bytes_transferred += len(data)
            self.on_plaintext(split.session, Direction.CLIENT_TO_SERVER, data)
            if not split.upstream.established:
                split.pending.append(data)
                return []
            return [Flight.of(split.upstream_conn, split.upstream.transport.seal(data))]
        reply = split.downstream.receive(msg)
        if split.downstream.established and split.session is None:
            split.session = SpxSession(
                session_id=f"{self.name}-{split.client_conn}",
                protocol_id=protocol_id(self.pattern),
                session_key=split.downstream.transport.recv.k,
                client_id=split.client_conn,
                server_id=self.server,
                peer_key=split.downstream.transport.send.k,
            )
            outcome.status = OutcomeStatus.ESTABLISHED
            outcome.handshake_us = net.now - outcome.started_us
            outcome.session_key = split.downstream.session_key_bytes()
        return [Flight.of(split.client_conn, *reply)]

    def _from_server(self, split: _SplitConnection, msg: WireMessage) -> List[Flight]:
        if msg.msg_type is MsgType.ABORT:
            self.outcome(split.client_conn).abort("server aborted")
            return [Flight.of(split.client_conn, msg)]
        if msg.msg_type is MsgType.APPLICATION_DATA:
            data = split.upstream.transport.open(msg.payload)
            self.on_plaintext(split.session, Direction.SERVER_TO_CLIENT, data)
            return [Flight.of(split.client_conn, split.downstream.transport.seal(data))]
        flights = [Flight.of(split.upstream_conn, *split.upstream.receive(msg))]
        if split.upstream.established and split.pending:
            pending, split.pending = split.pending, []
            flights.append(Flight.of(split.upstream_conn, *(split.upstream.transport.seal(d) for d in pending)))
        return flights
