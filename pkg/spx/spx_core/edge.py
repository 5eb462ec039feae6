"""The SPX edge function as a network endpoint."""

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

from ..endpoint import Endpoint, Flight, NetContext, OutcomeStatus, abort_frame, batch
from ..exceptions import SpxError
from ..see_sim import Enclave, SpxSession
from ..wire import Direction, MsgType, WireMessage
from .adapter import AdapterFactory
from .messages import ServerMode, attestation_frame, register_frame
from .operations import bind, detect, forward, grant_accept, ready_to_bind, relay
from .state import EdgeTrust, Phase, SpxEdgeState

logger = logging.getLogger(__name__)

PlaintextHook = Callable[[SpxSession, Direction, bytes], None]


@dataclass
class PlaintextObserver:
    """Default edge function: counts and digests the plaintext it is granted."""

    records: int = 0
    bytes_seen: int = 0
    digests: Dict[str, Any] = field(default_factory=dict)

    def __call__(self, session: SpxSession, direction: Direction, data: bytes) -> None:
        self.records += 1
        self.bytes_seen += len(data)
        key = f"{session.session_id}:{direction.name}"
        self.digests.setdefault(key, hashlib.sha256()).update(data)

    def digest(self, session_id: str, direction: Direction) -> Optional[bytes]:
        running = self.digests.get(f"{session_id}:{direction.name}")
        return running.digest() if running else None


class SpxEdgeFunction(Endpoint):
    """Edge endpoint that relays client sessions and is granted their keys.

    Args:
        name: endpoint name
        enclave: this edge function's enclave
        trust: provisioning for the upstream server
        server: endpoint name of the server
        adapters: protocol detectors, tried in order
        on_plaintext: edge function body; receives every decrypted record
    """

    role = "edge"

    def __init__(
        self,
        name: str,
        enclave: Enclave,
        trust: EdgeTrust,
        server: str,
        adapters: Sequence[AdapterFactory],
        on_plaintext: Optional[PlaintextHook] = None,
        compute_cost_us: float = 0.0,
    ):
        super().__init__(name, compute_cost_us=compute_cost_us)
        self.enclave = enclave
        self.trust = trust
        self.server = server
        self.adapters = list(adapters)
        self.on_plaintext = on_plaintext or PlaintextObserver()
        self.states: Dict[str, SpxEdgeState] = {}
        self._client_of: Dict[str, str] = {}
        self._held: Dict[str, List[WireMessage]] = {}
        self._registration_conn: Optional[str] = None
        self._registration_key = None
        self._counter = 0

    # Registration for the attest-before-connect strawman

    def start(self, net: NetContext) -> List[Flight]:
        if self.trust.mode is not ServerMode.ATTEST_BEFORE_CONNECT:
            return []
        self._registration_conn = net.open(self.name, self.server)
        self._registration_key = self.enclave.gen_ephemeral()
        return [Flight.of(self._registration_conn, register_frame(self.enclave.function_name))]

    def _on_challenge(self, msg: WireMessage) -> List[Flight]:
        report = self.enclave.attest(self._registration_key.public, msg.payload)
        return [Flight.of(self._registration_conn, attestation_frame(report))]

    # Dispatch

    def on_message(self, net: NetContext, conn: str, msg: WireMessage) -> List[Flight]:
        return self.on_flight(net, conn, [msg])

    def on_flight(self, net: NetContext, conn: str, frames: Sequence[WireMessage]) -> List[Flight]:
        if conn == self._registration_conn:
            return [f for m in frames if m.msg_type is MsgType.SPX_CHALLENGE for f in self._on_challenge(m)]
        if conn in self._client_of:
            client_conn = self._client_of[conn]
            handler = self._from_server
        else:
            client_conn = conn
            handler = self._from_client
        state = self.states.get(client_conn)
        try:
            return batch(handler(net, client_conn, frames))
        except SpxError as exc:
            state = state or self.states.get(client_conn)
            return self._abort(client_conn, state, f"{type(exc).__name__}: {exc}")

    def _abort(self, client_conn: str, state: Optional[SpxEdgeState], reason: str) -> List[Flight]:
        logger.warning(f"[{self.name}] aborting {client_conn}: {reason}")
        outcome = self.outcome(client_conn)
        outcome.abort(reason)
        flights = [Flight.of(client_conn, abort_frame(reason))]
        if state is not None:
            state.abort(reason)
            if state.channel_id:
                flights.append(Flight.of(state.channel_id, abort_frame(reason)))
        return flights

    def close(self) -> None:
        for state in self.states.values():
            state.forget_ephemeral()

    def _new_state(self, net: NetContext, client_conn: str) -> SpxEdgeState:
        self._counter += 1
        state = SpxEdgeState(
            enclave=self.enclave,
            trust=self.trust,
            session_id=f"{self.name}-{self._counter:06d}",
            client_id=client_conn,
        )
        state.channel_id = net.open(self.name, self.server)
        self._client_of[state.channel_id] = client_conn
        self.states[client_conn] = state
        outcome = self.outcome(client_conn)
        outcome.started_us = net.now
        return state

    # Client to server

    def _from_client(self, net: NetContext, client_conn: str, frames: Sequence[WireMessage]) -> List[Flight]:
        state = self.states.get(client_conn)
        outcome = self.outcome(client_conn)
        if state is None:
            state = self._new_state(net, client_conn)
            detect(state, frames[0], self.adapters)
            outcome.protocol = state.protocol_id
            if state.pass_through:
                outcome.status = OutcomeStatus.PASS_THROUGH
        if state.phase is Phase.ABORTED and not state.pass_through:
            return []

        up: List[WireMessage] = []
        flights: List[Flight] = []
        for msg in frames:
            if msg.msg_type is MsgType.ABORT:
                up.append(msg)
                outcome.abort("client aborted")
                state.abort("client aborted")
            elif state.pass_through:
                up.append(msg)
            elif msg.msg_type is MsgType.APPLICATION_DATA and state.adapter.handshake_done(
                Direction.CLIENT_TO_SERVER
            ):
                if state.established:
                    self._observe(state, Direction.CLIENT_TO_SERVER, msg)
                    up.append(msg)
                else:
                    self._held.setdefault(client_conn, []).append(msg)
            else:
                up.append(relay(state, msg, Direction.CLIENT_TO_SERVER))
                outcome.observed.append((int(msg.msg_type), int(Direction.CLIENT_TO_SERVER)))
            if ready_to_bind(state):
                flights.append(Flight.of(state.channel_id, *up))
                up = []
                flights.append(Flight.of(state.channel_id, bind(state), standalone=True))
        flights.append(Flight.of(state.channel_id, *up))
        return flights

    # Server to client

    def _from_server(self, net: NetContext, client_conn: str, frames: Sequence[WireMessage]) -> List[Flight]:
        state = self.states[client_conn]
        outcome = self.outcome(client_conn)
        if state.phase is Phase.ABORTED and not state.pass_through:
            return []

        down: List[WireMessage] = []
        flights: List[Flight] = []
        for msg in frames:
            if msg.msg_type is MsgType.ABORT:
                down.append(msg)
                outcome.abort("server aborted")
                state.abort("server aborted")
            elif state.pass_through:
                down.append(msg)
            elif msg.msg_type is MsgType.SPX_GRANT:
                session = grant_accept(state, msg, state.channel_id)
                outcome.status = OutcomeStatus.ESTABLISHED
                outcome.handshake_us = net.now - outcome.started_us
                outcome.session_key = session.session_key.bytes + (
                    session.peer_key.bytes if session.peer_key else b""
                )
                held = self._held.pop(client_conn, [])
                for record in held:
                    self._observe(state, Direction.CLIENT_TO_SERVER, record)
                if held:
                    flights.append(Flight.of(state.channel_id, *held))
            elif msg.msg_type is MsgType.APPLICATION_DATA and state.adapter.handshake_done(
                Direction.SERVER_TO_CLIENT
            ):
                if state.established:
                    self._observe(state, Direction.SERVER_TO_CLIENT, msg)
                down.append(msg)
            else:
                vanilla = forward(state, msg)
                if vanilla is None:
                    continue
                if state.pass_through:
                    outcome.status = OutcomeStatus.PASS_THROUGH
                    down.append(vanilla)
                    self._release_held(state, client_conn, flights)
                    continue
                down.append(relay(state, vanilla, Direction.SERVER_TO_CLIENT))
                outcome.observed.append((int(msg.msg_type), int(Direction.SERVER_TO_CLIENT)))
            if ready_to_bind(state):
                flights.append(Flight.of(state.channel_id, bind(state), standalone=True))
        flights.append(Flight.of(client_conn, *down))
        return flights

    def _release_held(self, state: SpxEdgeState, client_conn: str, flights: List[Flight]) -> None:
        held = self._held.pop(client_conn, [])
        if held:
            flights.append(Flight.of(state.channel_id, *held))

    def _observe(self, state: SpxEdgeState, direction: Direction, msg: WireMessage) -> None:
        plaintext = state.adapter.open_record(direction, msg.payload)
        self.outcome(state.client_id).bytes_transferred += len(plaintext)
        self.on_plaintext(state.session, direction, plaintext)
