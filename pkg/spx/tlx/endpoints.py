"""TLX network endpoints: client, echo server and the split-TLS proxy baseline."""

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
from .adapter import TLX_PROTOCOL_ID
from .handshake import RecordLayer, TlxClientHandshake, TlxServerHandshake
from .messages import DEFAULT_CERT_SIZE, Certificate

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 1024


class TlxClient(EchoClient):
    """Unmodified TLX client running an echo workload.

    Args:
        name: endpoint name
        peer: endpoint the client dials (an edge or the server itself)
        entropy: randomness for this client
        pin: certificate key the client trusts; ``None`` trusts any
        workload: echo transfers to run after the handshake
        block_size: plaintext bytes per record
    """

    def __init__(
        self,
        name: str,
        peer: str,
        entropy: Entropy,
        pin: Optional[bytes] = None,
        workload: Optional[Workload] = None,
        block_size: int = DEFAULT_BLOCK_SIZE,
        start_at_us: float = 0.0,
        timeout_us: Optional[float] = None,
        compute_cost_us: float = 0.0,
    ):
        super().__init__(
            name,
            peer,
            entropy,
            workload=workload,
            record_size=block_size,
            start_at_us=start_at_us,
            timeout_us=timeout_us,
            compute_cost_us=compute_cost_us,
        )
        self.handshake = TlxClientHandshake(entropy.spawn("handshake"), pin=pin)
        self.records: Optional[RecordLayer] = None

    def handshake_start(self) -> List[WireMessage]:
        return self.handshake.start()

    def handshake_receive(self, msg: WireMessage) -> List[WireMessage]:
        reply = self.handshake.receive(msg)
        if self.handshake.established:
            self.records = self.handshake.record_layer()
        return reply

    @property
    def handshake_established(self) -> bool:
        return self.handshake.established

    def session_key_bytes(self) -> bytes:
        return self.handshake.session_key.bytes

    def seal_record(self, data: bytes) -> WireMessage:
        return self.records.seal(data)

    def open_record(self, msg: WireMessage) -> bytes:
        return self.records.open(msg.payload)


class TlxServer(Endpoint):
    """TLX echo server.

    With ``spx_policy`` set the server answers SPX requests with an offer and
    grants the session key to the attested edge; without it, it behaves as a
    plain server that answers "Not Capable".
    """

    role = "server"

    def __init__(
        self,
        name: str,
        entropy: Entropy,
        signing_key: KeyPair,
        certificate: Optional[Certificate] = None,
        cert_size: int = DEFAULT_CERT_SIZE,
        spx_policy: Optional[SpxServerPolicy] = None,
        compute_cost_us: float = 0.0,
    ):
        super().__init__(name, compute_cost_us=compute_cost_us)
        self.entropy = entropy
        self.signing_key = signing_key
        self.certificate = certificate or Certificate.issue(signing_key, name)
        self.cert_size = cert_size
        self.spx_policy = spx_policy
        self.handshakes: Dict[str, TlxServerHandshake] = {}
        self.records: Dict[str, RecordLayer] = {}
        self._accepted = 0

    def _handshake_for(self, net: NetContext, conn: str) -> TlxServerHandshake:
        if conn not in self.handshakes:
            self._accepted += 1
            self.handshakes[conn] = TlxServerHandshake(
                self.entropy.spawn(f"conn/{self._accepted}"),
                self.signing_key,
                self.certificate,
                cert_size=self.cert_size,
                spx_policy=self.spx_policy,
            )
            self.outcome(conn).started_us = net.now
            self.outcome(conn).protocol = TLX_PROTOCOL_ID
        return self.handshakes[conn]

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
            if conn in self.records:
                return self._echo(conn, msg)
            handshake = self._handshake_for(net, conn)
            reply = handshake.receive(msg)
        except SpxError as exc:
            reason = f"{type(exc).__name__}: {exc}"
            logger.warning(f"[{self.name}] aborting {conn}: {reason}")
            outcome.abort(reason)
            self._close(conn)
            return [Flight.of(conn, abort_frame(reason))]
        if handshake.established:
            self.records[conn] = handshake.record_layer()
            outcome.status = OutcomeStatus.ESTABLISHED
            outcome.handshake_us = net.now - outcome.started_us
            outcome.session_key = handshake.session_key.bytes
        return [Flight.of(conn, *reply)]

    def _echo(self, conn: str, msg: WireMessage) -> List[Flight]:
        if msg.msg_type is not MsgType.APPLICATION_DATA:
            raise ProtocolViolation(f"{msg.msg_type.name} after the handshake")
        records = self.records[conn]
        data = records.open(msg.payload)
        self.outcome(conn).bytes_transferred += len(data)
        return [Flight.of(conn, records.seal(data))]

    def _close(self, conn: str) -> None:
        handshake = self.handshakes.get(conn)
        if handshake is not None:
            handshake.close()
        if self.spx_policy is not None:
            self.spx_policy.forget(conn)

    def close(self) -> None:
        for conn in self.outcomes:
            self._close(conn)


@dataclass
class _SplitConnection:
    client_conn: str
    upstream_conn: str
    downstream: TlxServerHandshake
    upstream: TlxClientHandshake
    session: Optional[SpxSession] = None
    down_records: Optional[RecordLayer] = None
    up_records: Optional[RecordLayer] = None
    pending: List[bytes] = field(default_factory=list)


class TlxSplitProxy(Endpoint):
    """Split-TLS baseline: the edge terminates TLX with its own certificate.

    Clients must trust the edge's certificate. A second, independent TLX
    session runs from the edge to the server and records are re-encrypted
    between the two.
    """

    role = "edge"

    def __init__(
        self,
        name: str,
        server: str,
        entropy: Entropy,
        signing_key: KeyPair,
        server_pin: Optional[bytes] = None,
        cert_size: int = DEFAULT_CERT_SIZE,
        on_plaintext=None,
        compute_cost_us: float = 0.0,
    ):
        super().__init__(name, compute_cost_us=compute_cost_us)
        self.server = server
        self.entropy = entropy
        self.signing_key = signing_key
        self.certificate = Certificate.issue(signing_key, name)
        self.server_pin = server_pin
        self.cert_size = cert_size
        self.on_plaintext = on_plaintext or PlaintextObserver()
        self.connections: Dict[str, _SplitConnection] = {}
        self._client_of: Dict[str, str] = {}

    def on_flight(self, net: NetContext, conn: str, frames) -> List[Flight]:
        client_conn = self._client_of.get(conn, conn)
        split = self.connections.get(client_conn)
        try:
            return super().on_flight(net, conn, frames)
        except SpxError as exc:
            reason = f"{type(exc).__name__}: {exc}"
            logger.warning(f"[{self.name}] aborting {client_conn}: {reason}")
            self.outcome(client_conn).abort(reason)
            flights = [Flight.of(client_conn, abort_frame(reason))]
            if split is not None:
                flights.append(Flight.of(split.upstream_conn, abort_frame(reason)))
            return flights

    def on_message(self, net: NetContext, conn: str, msg: WireMessage) -> List[Flight]:
        if conn in self._client_of:
            return self._from_server(net, self.connections[self._client_of[conn]], msg)
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
            downstream=TlxServerHandshake(
                self.entropy.spawn(f"down/{index}"),
                self.signing_key,
                self.certificate,
                cert_size=self.cert_size,
            ),
            upstream=TlxClientHandshake(self.entropy.spawn(f"up/{index}"), pin=self.server_pin),
        )
        self.connections[client_conn] = split
        self._client_of[upstream_conn] = client_conn
        outcome = self.outcome(client_conn)
        outcome.started_us = net.now
        outcome.protocol = TLX_PROTOCOL_ID
        return split, [Flight.of(upstream_conn, *split.upstream.start())]

    def _from_client(self, net: NetContext, split: _SplitConnection, msg: WireMessage) -> List[Flight]:
        outcome = self.outcome(split.client_conn)
        if msg.msg_type is MsgType.ABORT:
            outcome.abort("client aborted")
            return [Flight.of(split.upstream_conn, msg)]
        if split.down_records is not None:
            data = split.down_records.open(msg.payload)
            outcome.bytes_transferred += len(data)
            self.on_plaintext(split.session, Direction.CLIENT_TO_SERVER, data)
            if split.up_records is None:
                split.pending.append(data)
                return []
            return [Flight.of(split.upstream_conn, split.up_records.seal(data))]
        reply = split.downstream.receive(msg)
        if split.downstream.established:
            split.down_records = split.downstream.record_layer()
            split.session = SpxSession(
                session_id=f"{self.name}-{split.client_conn}",
                protocol_id=TLX_PROTOCOL_ID,
                session_key=split.downstream.session_key,
                client_id=split.client_conn,
                server_id=self.server,
            )
            outcome.status = OutcomeStatus.ESTABLISHED
            outcome.handshake_us = net.now - outcome.started_us
            outcome.session_key = split.downstream.session_key.bytes
        return [Flight.of(split.client_conn, *reply)]

    def _from_server(self, net: NetContext, split: _SplitConnection, msg: WireMessage) -> List[Flight]:
        if msg.msg_type is MsgType.ABORT:
            self.outcome(split.client_conn).abort("server aborted")
            return [Flight.of(split.client_conn, msg)]
        if split.up_records is not None:
            data = split.up_records.open(msg.payload)
            self.on_plaintext(split.session, Direction.SERVER_TO_CLIENT, data)
            return [Flight.of(split.client_conn, split.down_records.seal(data))]
        flights = [Flight.of(split.upstream_conn, *split.upstream.receive(msg))]
        if split.upstream.established:
            split.up_records = split.upstream.record_layer()
            pending, split.pending = split.pending, []
            flights.append(Flight.of(split.upstream_conn, *(split.up_records.seal(d) for d in pending)))
        return flights
