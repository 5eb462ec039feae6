"""Adversaries against the edge-server binding: cuckoo, TOCTTOU and a passive tap.

Each attack builds an SPX scenario, inserts an adversary endpoint and reports
``AttackSucceeded`` exactly when the adversary ends up holding the session
key of the client it targeted. The strawman server modes are the negative
controls: against them both relaying attacks must succeed.
"""

import logging
from abc import abstractmethod
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Set

from ..crypto_core import Entropy, KeyPair, generate_keypair
from ..endpoint import Endpoint, Flight, NetContext, abort_frame, batch
from ..exceptions import AuthFailure, ConfigError, ForeignKey, ProtocolViolation, SpxError
from ..noixe import noise_adapter_factory
from ..see_sim import EcallSurface, SPX_NONCE_SIZE
from ..spx_core import AdapterFactory, ProtocolAdapter, ServerMode, SpxOffer, SpxRequest, open_grant, parse_grant
from ..spx_core.messages import attest_with_key_frame, attestation_frame, grant_request_frame
from ..tlx import tlx_adapter_factory
from ..wire import (
    EXT_SPX_RESPONSE,
    Direction,
    MsgType,
    WireMessage,
    add_extension,
    find_extension,
    unpack_body,
    without_spx,
)
from .network import TraceEvent
from .scenarios import ATTACKER, EDGE, SERVER, Mode, ScenarioSpec, World, build_world, run_world

logger = logging.getLogger(__name__)

# Victim of the TOCTTOU attack starts this long after the benign session.
TOCTTOU_DELAY_US = 20_000.0


class AttackOutcome(str, Enum):
    DEFEATED = "AttackDefeated"
    SUCCEEDED = "AttackSucceeded"


@dataclass
class _Hijack:
    """One client connection the relay has taken over."""

    client_conn: str
    upstream_conn: str
    keypair: KeyPair
    edge_nonce: bytes
    adapter: Optional[ProtocolAdapter] = None
    requested: bool = False
    offer: Optional[SpxOffer] = None
    binding: Optional[bytes] = None
    bound: bool = False
    blind: bool = False
    grant_opened: Optional[bool] = None
    stolen: Optional[bytes] = None


class MaliciousRelay(Endpoint):
    """Adversary that clients dial instead of the genuine edge.

    It speaks the SPX request/offer exchange with the server itself and
    replicates the handshake the same way an edge would, but owns no enclave:
    subclasses decide what to send at the bind point. If the grant opens
    under the relay's own key, the session key is stolen; otherwise the relay
    keeps forwarding frames blind.
    """

    role = "attacker"

    def __init__(
        self,
        name: str,
        server: str,
        entropy: Entropy,
        adapters: Sequence[AdapterFactory],
        compute_cost_us: float = 0.0,
    ):
        super().__init__(name, compute_cost_us=compute_cost_us)
        self.server = server
        self.entropy = entropy
        self.adapters = list(adapters)
        self.hijacks: Dict[str, _Hijack] = {}
        self._client_of: Dict[str, str] = {}
        self.stolen_keys: Set[bytes] = set()
        self.stolen_plaintext = 0
        self.notes: List[str] = []

    @abstractmethod
    def forge_bind(self, hijack: _Hijack) -> WireMessage:
        """The frame to send at the bind point; may raise SpxError to give up."""

    def on_message(self, net: NetContext, conn: str, msg: WireMessage) -> List[Flight]:
        return self.on_flight(net, conn, [msg])

    def on_flight(self, net: NetContext, conn: str, frames: Sequence[WireMessage]) -> List[Flight]:
        if conn in self._client_of:
            hijack = self.hijacks[self._client_of[conn]]
            flights = self._from_server(hijack, frames)
        else:
            hijack = self.hijacks.get(conn) or self._hijack(net, conn, frames[0])
            flights = self._from_client(hijack, frames)
        return batch(flights)

    def _hijack(self, net: NetContext, client_conn: str, first: WireMessage) -> _Hijack:
        index = len(self.hijacks) + 1
        stream = self.entropy.spawn(f"hijack/{index}")
        hijack = _Hijack(
            client_conn=client_conn,
            upstream_conn=net.open(self.name, self.server),
            keypair=generate_keypair(stream.spawn("key")),
            edge_nonce=stream.spawn("nonce").bytes(SPX_NONCE_SIZE),
        )
        hijack.adapter = next((a for a in (f(first) for f in self.adapters) if a is not None), None)
        hijack.blind = hijack.adapter is None
        self.hijacks[client_conn] = hijack
        self._client_of[hijack.upstream_conn] = client_conn
        logger.info(f"[{self.name}] hijacked {client_conn}")
        return hijack

    def _note(self, text: str) -> None:
        logger.info(f"[{self.name}] {text}")
        self.notes.append(text)

    def _ready(self, hijack: _Hijack) -> bool:
        return (
            not hijack.blind
            and not hijack.bound
            and hijack.offer is not None
            and hijack.adapter.at_bind_point()
        )

    def _bind(self, hijack: _Hijack) -> List[Flight]:
        hijack.binding = hijack.adapter.channel_binding()
        hijack.bound = True
        try:
            frame = self.forge_bind(hijack)
        except SpxError as exc:
            self._note(f"could not forge a bind: {type(exc).__name__}: {exc}")
            return [
                Flight.of(hijack.upstream_conn, abort_frame("relay gave up")),
                Flight.of(hijack.client_conn, abort_frame("relay gave up")),
            ]
        return [Flight.of(hijack.upstream_conn, frame, standalone=True)]

    def _peek(self, hijack: _Hijack, msg: WireMessage, direction: Direction) -> None:
        if hijack.stolen is None:
            return
        try:
            self.stolen_plaintext += len(hijack.adapter.open_record(direction, msg.payload))
        except SpxError:
            pass

    def _replicate(self, hijack: _Hijack, msg: WireMessage, direction: Direction) -> None:
        try:
            hijack.adapter.replicate(msg, direction)
        except SpxError as exc:
            self._note(f"lost track of {hijack.client_conn}: {type(exc).__name__}: {exc}")
            hijack.blind = True

    def _from_client(self, hijack: _Hijack, frames: Sequence[WireMessage]) -> List[Flight]:
        up: List[WireMessage] = []
        flights: List[Flight] = []
        for msg in frames:
            if hijack.blind or msg.msg_type is MsgType.ABORT:
                up.append(msg)
                continue
            if msg.msg_type is MsgType.APPLICATION_DATA and hijack.adapter.handshake_done(Direction.CLIENT_TO_SERVER):
                self._peek(hijack, msg, Direction.CLIENT_TO_SERVER)
                up.append(msg)
                continue
            vanilla = without_spx(msg)
            self._replicate(hijack, vanilla, Direction.CLIENT_TO_SERVER)
            if not hijack.requested:
                hijack.requested = True
                request = SpxRequest(hijack.edge_nonce).to_extension()
                vanilla = WireMessage(msg.msg_type, add_extension(vanilla.payload, request))
            up.append(vanilla)
            if self._ready(hijack):
                flights.append(Flight.of(hijack.upstream_conn, *up))
                up = []
                flights.extend(self._bind(hijack))
        flights.append(Flight.of(hijack.upstream_conn, *up))
        return flights

    def _from_server(self, hijack: _Hijack, frames: Sequence[WireMessage]) -> List[Flight]:
        down: List[WireMessage] = []
        flights: List[Flight] = []
        for msg in frames:
            if msg.msg_type is MsgType.SPX_GRANT:
                self._on_grant(hijack, msg)
                continue
            if msg.is_spx_internal:
                continue
            if hijack.blind or msg.msg_type is MsgType.ABORT:
                down.append(msg)
                continue
            if msg.msg_type is MsgType.APPLICATION_DATA and hijack.adapter.handshake_done(Direction.SERVER_TO_CLIENT):
                self._peek(hijack, msg, Direction.SERVER_TO_CLIENT)
                down.append(msg)
                continue
            if msg.msg_type is hijack.adapter.offer_carrier() and hijack.offer is None:
                self._take_offer(hijack, msg)
            vanilla = without_spx(msg)
            if not hijack.blind:
                self._replicate(hijack, vanilla, Direction.SERVER_TO_CLIENT)
            down.append(vanilla)
            if self._ready(hijack):
                flights.extend(self._bind(hijack))
        flights.append(Flight.of(hijack.client_conn, *down))
        return flights

    def _take_offer(self, hijack: _Hijack, msg: WireMessage) -> None:
        _, extensions = unpack_body(msg.payload)
        ext = find_extension(extensions, EXT_SPX_RESPONSE)
        offer = SpxOffer.from_extension(ext) if ext is not None else None
        if offer is None or not offer.capable:
            self._note("server made no SPX offer, relaying blind")
            hijack.blind = True
            return
        hijack.offer = offer

    def _on_grant(self, hijack: _Hijack, msg: WireMessage) -> None:
        report, sealed = parse_grant(msg)
        try:
            secret = open_grant(hijack.keypair, report.ephemeral_public, hijack.binding, hijack.offer.nonce, sealed)
        except AuthFailure:
            hijack.grant_opened = False
            hijack.blind = True
            self._note("grant does not open under the relay's key, relaying blind")
            return
        hijack.grant_opened = True
        client_key, server_key = hijack.adapter.install_grant(secret)
        hijack.stolen = client_key.bytes + (server_key.bytes if server_key is not None else b"")
        self.stolen_keys.add(hijack.stolen)
        self._note(f"grant opened, session key of {hijack.client_conn} stolen")


class CuckooRelay(MaliciousRelay):
    """Cuckoo adversary: privileged on a benign edge host, relays through itself.

    It can mint keys in and request reports from the benign enclave through
    the host-visible ecall surface, never read the enclave's private keys.
    """

    def __init__(self, name: str, server: str, entropy: Entropy, adapters, surface: EcallSurface, mode: ServerMode):
        super().__init__(name, server, entropy, adapters)
        self.surface = surface
        self.mode = mode

    def forge_bind(self, hijack: _Hijack) -> WireMessage:
        nonce = hijack.offer.nonce
        if self.mode is ServerMode.ATTEST_AFTER_CONNECT:
            report = self.surface.attest(self.surface.gen_ephemeral(), nonce, hijack.binding)
            return attest_with_key_frame(report, hijack.keypair.public)
        try:
            self.surface.attest(hijack.keypair.public, nonce, hijack.binding)
        except ForeignKey:
            self._note("enclave refused to attest the relay's own key")
        report = self.surface.attest(self.surface.gen_ephemeral(), nonce, hijack.binding)
        return attestation_frame(report)


class TocttouRelay(MaliciousRelay):
    """TOCTTOU adversary: reuses evidence from an earlier, genuine attestation.

    It watches the links, keeps the first report the genuine edge sends, and
    presents it on connections it has redirected to itself. Against the
    attest-before-connect strawman it simply claims the registered edge's
    identity.
    """

    observes_links = True

    def __init__(self, name: str, server: str, entropy: Entropy, adapters, edge: str, mode: ServerMode):
        super().__init__(name, server, entropy, adapters)
        self.edge = edge
        self.mode = mode
        self.captured: Optional[WireMessage] = None

    def observe(self, event: TraceEvent) -> None:
        if self.captured is None and event.src == self.edge and event.msg.msg_type is MsgType.SPX_ATTESTATION:
            self.captured = event.msg
            self._note(f"captured an attestation from {self.edge}")

    def forge_bind(self, hijack: _Hijack) -> WireMessage:
        if self.mode is ServerMode.ATTEST_BEFORE_CONNECT:
            return grant_request_frame(self.edge, hijack.keypair.public)
        if self.captured is None:
            raise ProtocolViolation("no attestation captured yet")
        return self.captured


class PassiveObserver(Endpoint):
    """Records every delivered payload; never sends anything."""

    role = "observer"
    observes_links = True

    def __init__(self, name: str = "observer"):
        super().__init__(name)
        self.payloads: List[bytes] = []

    def observe(self, event: TraceEvent) -> None:
        self.payloads.append(event.msg.payload)

    def on_message(self, net: NetContext, conn: str, msg: WireMessage) -> List[Flight]:
        return []

    def saw(self, secret: bytes) -> bool:
        return any(secret in payload for payload in self.payloads)


@dataclass
class AttackReport:
    attack: str
    scenario: str
    server_mode: str
    seed: int
    outcome: AttackOutcome
    victim_status: str
    victim_reason: Optional[str] = None
    grant_opened: Optional[bool] = None
    stolen_plaintext_bytes: int = 0
    server_ephemerals_left: int = 0
    notes: List[str] = field(default_factory=list)

    @property
    def defeated(self) -> bool:
        return self.outcome is AttackOutcome.DEFEATED

    def to_dict(self) -> Dict[str, object]:
        data = asdict(self)
        data["outcome"] = self.outcome.value
        return data


def _relay_adapters(world: World) -> List[AdapterFactory]:
    return [tlx_adapter_factory(world.signing_key.public), noise_adapter_factory(world.noise_static.public)]


def _report(attack: str, world: World, relay: MaliciousRelay, victim: int) -> AttackReport:
    outcome = world.client_outcomes()[victim - 1]
    stolen = outcome.session_key is not None and outcome.session_key in relay.stolen_keys
    hijack = next(iter(relay.hijacks.values()), None)
    report = AttackReport(
        attack=attack,
        scenario=world.spec.label,
        server_mode=world.spec.server_mode.value,
        seed=world.spec.seed,
        outcome=AttackOutcome.SUCCEEDED if stolen else AttackOutcome.DEFEATED,
        victim_status=outcome.status.value,
        victim_reason=outcome.reason,
        grant_opened=hijack.grant_opened if hijack else None,
        stolen_plaintext_bytes=relay.stolen_plaintext,
        server_ephemerals_left=world.server_enclave.live_ephemerals,
        notes=list(relay.notes),
    )
    logger.info(f"{attack} vs {report.scenario} ({report.server_mode}): {report.outcome.value}")
    return report


def cuckoo_attack(spec: ScenarioSpec, strawman: bool = False) -> AttackReport:
    """Route the client to a relay that launders attestation through the benign enclave.

    Args:
        spec: base scenario; protocol, pattern, seed and latencies are used
        strawman: run against the attest-after-connect server instead of SPX
    """
    mode = ServerMode.ATTEST_AFTER_CONNECT if strawman else ServerMode.CHANNEL_BOUND
    spec = replace(spec, mode=Mode.SPX, server_mode=mode, clients=1)
    world = build_world(spec, route=lambda i: ATTACKER)
    relay = CuckooRelay(
        ATTACKER,
        SERVER,
        world.entropy.spawn(ATTACKER),
        _relay_adapters(world),
        surface=world.edge_enclave.surface(),
        mode=mode,
    )
    world.network.topology.alias(ATTACKER, like=EDGE)
    world.network.add(relay)
    run_world(world, raise_on_deadlock=False)
    return _report("cuckoo", world, relay, victim=1)


def tocttou_attack(spec: ScenarioSpec, strawman: bool = False, delay_us: float = TOCTTOU_DELAY_US) -> AttackReport:
    """Let a genuine edge attest first, then redirect a later client to the relay.

    ``client-1`` goes through the genuine edge; ``client-2`` starts
    ``delay_us`` later and is routed to the relay.

    Args:
        spec: base scenario
        strawman: run against the attest-before-connect server instead of SPX
    """
    mode = ServerMode.ATTEST_BEFORE_CONNECT if strawman else ServerMode.CHANNEL_BOUND
    spec = replace(spec, mode=Mode.SPX, server_mode=mode, clients=2)
    world = build_world(
        spec,
        route=lambda i: EDGE if i == 1 else ATTACKER,
        start_at=lambda i: 0.0 if i == 1 else delay_us,
    )
    relay = TocttouRelay(
        ATTACKER, SERVER, world.entropy.spawn(ATTACKER), _relay_adapters(world), edge=EDGE, mode=mode
    )
    world.network.topology.alias(ATTACKER, like=EDGE)
    world.network.add(relay)
    run_world(world, raise_on_deadlock=False)
    return _report("tocttou", world, relay, victim=2)


def passive_observation(spec: ScenarioSpec) -> AttackReport:
    """Run ``spec`` with a tap on every link and look for session key bytes."""
    world = build_world(replace(spec, mode=Mode.SPX))
    observer = PassiveObserver()
    world.network.add(observer)
    run_world(world)
    keys = [o.session_key for o in world.client_outcomes() if o.session_key]
    chunks = [key[i:i + 32] for key in keys for i in range(0, len(key), 32)]
    leaked = any(observer.saw(chunk) for chunk in chunks)
    victim = world.client_outcomes()[0]
    return AttackReport(
        attack="passive",
        scenario=world.spec.label,
        server_mode=world.spec.server_mode.value,
        seed=world.spec.seed,
        outcome=AttackOutcome.SUCCEEDED if leaked else AttackOutcome.DEFEATED,
        victim_status=victim.status.value,
        victim_reason=victim.reason,
        server_ephemerals_left=world.server_enclave.live_ephemerals,
        notes=[f"{len(observer.payloads)} payloads observed, {len(chunks)} key(s) checked"],
    )


def _passive(spec: ScenarioSpec, strawman: bool = False) -> AttackReport:
    if strawman:
        raise ConfigError("the passive tap has no strawman variant")
    return passive_observation(spec)


ATTACKS = {
    "cuckoo": cuckoo_attack,
    "tocttou": tocttou_attack,
    "passive": _passive,
}


def run_attack(name: str, spec: ScenarioSpec, strawman: bool = False) -> AttackReport:
    """Raises ConfigError for an unknown attack name."""
    if name not in ATTACKS:
        raise ConfigError(f"unknown attack {name!r}; choose from {', '.join(ATTACKS)}")
    return ATTACKS[name](spec, strawman=strawman)


def attack_campaign(name: str, spec: ScenarioSpec, seeds: Sequence[int], strawman: bool = False) -> List[AttackReport]:
    return [run_attack(name, replace(spec, seed=seed), strawman=strawman) for seed in seeds]
