"""Scenario builder: clients, edge and server wired up for one protocol and mode.

A scenario is fully described by a :class:`ScenarioSpec`; building it twice
with the same spec gives byte-identical traces.
"""

import logging
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

from ..config import Config, parse_int_list, parse_key_values
from ..crypto_core import Entropy, KeyPair, generate_keypair, generate_signing_keypair
from ..endpoint import Endpoint, Outcome, OutcomeStatus
from ..exceptions import ConfigError, HandshakeFailure
from ..noixe import NoiseClient, NoiseServer, NoiseSplitProxy, noise_adapter_factory, pattern_by_name
from ..see_sim import (
    SESSION_SLOT_BYTES,
    DirectoryHostStore,
    Enclave,
    MemoryHostStore,
    Platform,
    measure,
)
from ..spx_core import (
    EdgeTrust,
    PlaintextObserver,
    ProtocolAdapter,
    ServerMode,
    SpxEdgeFunction,
    SpxServerPolicy,
    expected_extra_bytes,
    extra_rtts,
    link_bytes,
    spx_bytes,
)
from ..tlx import DEFAULT_BLOCK_SIZE, DEFAULT_CERT_SIZE, TlxClient, TlxServer, TlxSplitProxy, tlx_adapter_factory
from ..workload import Workload
from .network import Network, Topology, Trace

logger = logging.getLogger(__name__)

SERVER = "server"
EDGE = "edge"
ATTACKER = "attacker"

EDGE_MANIFEST = b"spx-edge-function:plaintext-observer:v1"
SERVER_MANIFEST = b"spx-server:echo:v1"


def client_name(index: int) -> str:
    return f"client-{index}"


class Protocol(str, Enum):
    TLX = "tlx"
    NOIXE = "noixe"


class Mode(str, Enum):
    """E2E: client talks to the server directly. SPLIT: the edge terminates
    the session with its own credentials. SPX: the edge is granted the key."""

    E2E = "e2e"
    SPLIT = "split"
    SPX = "spx"


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything that determines one simulated run."""

    protocol: Protocol = Protocol.TLX
    mode: Mode = Mode.SPX
    pattern: str = "XX"
    clients: int = 1
    workload: Tuple[int, ...] = ()
    client_edge_us: float = 482.0
    edge_server_us: float = 451.0
    client_server_us: float = 481.0
    jitter_us: float = 0.0
    compute_cost_us: float = 0.0
    cert_size: int = DEFAULT_CERT_SIZE
    block_size: int = DEFAULT_BLOCK_SIZE
    max_message: int = 65535
    seed: int = 0
    server_mode: ServerMode = ServerMode.CHANNEL_BOUND
    stagger_us: float = 0.0
    memory_cap_sessions: Optional[int] = None
    spill_dir: Optional[str] = None
    timeout_us: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "server_mode", ServerMode(self.server_mode))
        object.__setattr__(self, "workload", tuple(self.workload))
        if self.clients < 1:
            raise ConfigError(f"a scenario needs at least one client, got {self.clients}")
        if self.protocol is Protocol.NOIXE:
            pattern_by_name(self.pattern)

    @property
    def label(self) -> str:
        name = self.protocol.value if self.protocol is Protocol.TLX else f"noixe-{self.pattern}"
        return f"{name}/{self.mode.value}"

    @classmethod
    def from_config(cls, config: Config, protocol: Protocol = Protocol.TLX, mode: Mode = Mode.SPX, **overrides):
        values = dict(
            protocol=protocol,
            mode=mode,
            pattern=config.noise_pattern,
            client_edge_us=config.client_edge_us,
            edge_server_us=config.edge_server_us,
            client_server_us=config.client_server_us,
            jitter_us=config.jitter_us,
            compute_cost_us=config.compute_cost_us,
            cert_size=config.cert_size,
            block_size=config.tls_block_size,
            max_message=config.noise_max_message,
            seed=config.seed,
            memory_cap_sessions=config.memory_cap_sessions,
            spill_dir=config.spill_dir,
            timeout_us=config.handshake_timeout_us,
        )
        values.update(overrides)
        return cls(**values)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ScenarioSpec":
        """Read a topology file in the ``key = value`` format.

        Keys are the field names of this class; ``workload`` is a comma
        separated list of echo transfer sizes.

        Raises:
            ConfigError: unreadable file, unknown key or bad value
        """
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read topology {path}: {exc}") from exc
        return cls.from_mapping(parse_key_values(text, str(path)))

    @classmethod
    def from_mapping(cls, values: Dict[str, str]) -> "ScenarioSpec":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown topology key {key!r}")
            try:
                kwargs[key] = _TOPOLOGY_CONVERTERS.get(key, str)(raw)
            except ValueError as exc:
                raise ConfigError(f"{key} = {raw!r}: {exc}") from exc
        return cls(**kwargs)


def _optional(convert):
    return lambda raw: None if raw.lower() in ("", "none") else convert(raw)


_TOPOLOGY_CONVERTERS: Dict[str, Callable[[str], object]] = {
    "protocol": Protocol,
    "mode": Mode,
    "server_mode": ServerMode,
    "pattern": str.upper,
    "clients": int,
    "workload": parse_int_list,
    "client_edge_us": float,
    "edge_server_us": float,
    "client_server_us": float,
    "jitter_us": float,
    "compute_cost_us": float,
    "cert_size": int,
    "block_size": int,
    "max_message": int,
    "seed": int,
    "stagger_us": float,
    "memory_cap_sessions": _optional(int),
    "spill_dir": _optional(str),
    "timeout_us": _optional(float),
}


@dataclass
class World:
    """A built but not yet run scenario."""

    spec: ScenarioSpec
    network: Network
    entropy: Entropy
    platform: Platform
    server: Endpoint
    clients: List[Endpoint]
    policy: SpxServerPolicy
    trust: EdgeTrust
    edge_enclave: Enclave
    server_enclave: Enclave
    signing_key: KeyPair
    noise_static: KeyPair
    edge: Optional[Endpoint] = None
    observer: PlaintextObserver = field(default_factory=PlaintextObserver)

    def client_outcomes(self) -> List[Outcome]:
        return [next(iter(c.outcomes.values()), Outcome(c.name, "", "client")) for c in self.clients]


def _topology(spec: ScenarioSpec) -> Topology:
    topology = Topology(jitter_us=spec.jitter_us)
    topology.set_latency(EDGE, SERVER, spec.edge_server_us)
    for i in range(1, spec.clients + 1):
        topology.set_latency(client_name(i), EDGE, spec.client_edge_us)
        topology.set_latency(client_name(i), SERVER, spec.client_server_us)
    return topology


def _host_store(spec: ScenarioSpec):
    return DirectoryHostStore(spec.spill_dir) if spec.spill_dir else MemoryHostStore()


def build_world(
    spec: ScenarioSpec,
    route: Optional[Callable[[int], str]] = None,
    start_at: Optional[Callable[[int], float]] = None,
    workload_for: Optional[Callable[[int], Tuple[int, ...]]] = None,
) -> World:
    """Create every endpoint for ``spec`` and register it with a fresh network.

    Args:
        spec: the scenario
        route: maps a 1-based client index to the endpoint it dials; by
            default the edge, or the server in E2E mode
        start_at: maps a client index to its start time
        workload_for: maps a client index to its echo transfer sizes; by
            default every client runs ``spec.workload``
    """
    root = Entropy(spec.seed)
    network = Network(_topology(spec), root.spawn("network"))
    platform = Platform(root.spawn("platform"))
    cap = None if spec.memory_cap_sessions is None else spec.memory_cap_sessions * SESSION_SLOT_BYTES
    server_enclave = platform.launch(SERVER, SERVER_MANIFEST)
    edge_enclave = platform.launch(EDGE, EDGE_MANIFEST, memory_cap_bytes=cap, host_store=_host_store(spec))

    signing_key = generate_signing_keypair(root.spawn("server/signing-key"))
    noise_static = generate_keypair(root.spawn("server/noise-static"))
    policy = SpxServerPolicy(
        signing_key=signing_key,
        enclave=server_enclave,
        edge_measurement=measure(EDGE_MANIFEST),
        platform_public=platform.public_key,
        mode=spec.server_mode,
        server_id=SERVER,
    )
    trust = EdgeTrust(
        server_pin=signing_key.public,
        server_measurement=measure(SERVER_MANIFEST),
        platform_public=platform.public_key,
        server_id=SERVER,
        mode=spec.server_mode,
    )
    observer = PlaintextObserver()
    cost = spec.compute_cost_us
    tlx = spec.protocol is Protocol.TLX
    pattern = None if tlx else pattern_by_name(spec.pattern)

    if tlx:
        server = TlxServer(
            SERVER, root.spawn("server"), signing_key, cert_size=spec.cert_size, spx_policy=policy, compute_cost_us=cost
        )
    else:
        server = NoiseServer(
            SERVER,
            root.spawn("server"),
            pattern,
            noise_static,
            spx_policy=policy,
            max_message=spec.max_message,
            compute_cost_us=cost,
        )

    edge: Optional[Endpoint] = None
    client_pin = signing_key.public if tlx else noise_static.public
    if spec.mode is Mode.SPX:
        edge = SpxEdgeFunction(
            EDGE,
            edge_enclave,
            trust,
            SERVER,
            adapters=[tlx_adapter_factory(signing_key.public), noise_adapter_factory(noise_static.public)],
            on_plaintext=observer,
            compute_cost_us=cost,
        )
    elif spec.mode is Mode.SPLIT and tlx:
        edge_key = generate_signing_keypair(root.spawn("edge/cert-key"))
        edge = TlxSplitProxy(
            EDGE,
            SERVER,
            root.spawn("edge"),
            edge_key,
            server_pin=signing_key.public,
            cert_size=spec.cert_size,
            on_plaintext=observer,
            compute_cost_us=cost,
        )
        client_pin = edge_key.public
    elif spec.mode is Mode.SPLIT:
        edge_static = generate_keypair(root.spawn("edge/noise-static"))
        edge = NoiseSplitProxy(
            EDGE,
            SERVER,
            root.spawn("edge"),
            pattern,
            edge_static,
            server_static=noise_static.public,
            max_message=spec.max_message,
            on_plaintext=observer,
            compute_cost_us=cost,
        )
        client_pin = edge_static.public

    default_peer = SERVER if spec.mode is Mode.E2E else EDGE
    route = route or (lambda i: default_peer)
    start_at = start_at or (lambda i: (i - 1) * spec.stagger_us)
    workload_for = workload_for or (lambda i: spec.workload)
    clients: List[Endpoint] = []
    for i in range(1, spec.clients + 1):
        name = client_name(i)
        sizes = workload_for(i)
        workload = Workload.echo(*sizes) if sizes else Workload.handshake_only()
        if tlx:
            client = TlxClient(
                name,
                route(i),
                root.spawn(name),
                pin=client_pin,
                workload=workload,
                block_size=spec.block_size,
                start_at_us=start_at(i),
                timeout_us=spec.timeout_us,
                compute_cost_us=cost,
            )
        else:
            client = NoiseClient(
                name,
                route(i),
                root.spawn(name),
                pattern,
                remote_static=client_pin if pattern.needs_responder_static else None,
                pin=client_pin,
                workload=workload,
                max_message=spec.max_message,
                start_at_us=start_at(i),
                timeout_us=spec.timeout_us,
                compute_cost_us=cost,
            )
        clients.append(client)

    network.add(server)
    if edge is not None:
        network.add(edge)
    network.add_all(clients)
    logger.debug(f"Built {spec.label} scenario with {spec.clients} client(s), seed {spec.seed}")
    return World(
        spec=spec,
        network=network,
        entropy=root,
        platform=platform,
        server=server,
        clients=clients,
        policy=policy,
        trust=trust,
        edge_enclave=edge_enclave,
        server_enclave=server_enclave,
        signing_key=signing_key,
        noise_static=noise_static,
        edge=edge,
        observer=observer,
    )


@dataclass
class ScenarioResult:
    """Trace and per-endpoint outcomes of one run."""

    world: World
    trace: Trace

    @property
    def spec(self) -> ScenarioSpec:
        return self.world.spec

    @property
    def client_outcomes(self) -> List[Outcome]:
        return self.world.client_outcomes()

    @property
    def outcomes(self) -> Dict[str, List[Outcome]]:
        return {name: list(e.outcomes.values()) for name, e in self.world.network.endpoints.items()}

    @property
    def all_succeeded(self) -> bool:
        return all(o.status is OutcomeStatus.SUCCESS for o in self.client_outcomes)

    @property
    def handshake_times_us(self) -> List[float]:
        return [o.handshake_us for o in self.client_outcomes if o.handshake_us is not None]

    @property
    def batch_handshake_us(self) -> Optional[float]:
        """From the first client start to the last finished handshake."""
        done = [o for o in self.client_outcomes if o.handshake_us is not None]
        if not done:
            return None
        return max(o.started_us + o.handshake_us for o in done) - min(o.started_us for o in done)

    @property
    def completion_times_us(self) -> List[float]:
        return [o.completed_us for o in self.client_outcomes if o.completed_us is not None]

    @property
    def extra_rtts(self) -> int:
        if self.spec.mode is not Mode.SPX:
            return 0
        return extra_rtts(self.trace, EDGE, SERVER)

    @property
    def spx_bytes(self) -> int:
        return spx_bytes(self.trace, EDGE, SERVER)

    def adapter(self) -> Optional[ProtocolAdapter]:
        """Adapter of the edge's first SPX session, if any."""
        edge = self.world.edge
        states = getattr(edge, "states", {})
        return next((s.adapter for s in states.values() if s.adapter is not None), None)


def run_world(world: World, raise_on_deadlock: bool = True) -> ScenarioResult:
    trace = world.network.run(raise_on_deadlock=raise_on_deadlock)
    spec = world.spec
    trace.meta.update(
        scenario=spec.label,
        seed=spec.seed,
        clients=spec.clients,
        server_mode=spec.server_mode.value,
        links={f"{a}<->{b}": us for (a, b), us in sorted(world.network.topology.links.items())},
    )
    result = ScenarioResult(world, trace)
    ok = sum(o.status is OutcomeStatus.SUCCESS for o in result.client_outcomes)
    logger.info(f"{spec.label}: {ok}/{spec.clients} client(s) succeeded, {len(trace)} frames")
    return result


def run_scenario(spec: ScenarioSpec) -> ScenarioResult:
    """Build and run ``spec``.

    Raises:
        Deadlock: the run stalled with endpoints still waiting
    """
    return run_world(build_world(spec))


@dataclass(frozen=True)
class Overhead:
    """Edge-server cost of SPX over a direct connection, for one handshake."""

    protocol_id: str
    extra_rtts: int
    extra_bytes: int
    expected_bytes: int
    spx_bytes: int


def measure_overhead(spec: ScenarioSpec) -> Overhead:
    """Compare a single-handshake SPX run with the E2E run of the same seed.

    Extra bytes are the edge-server link bytes under SPX minus the
    client-server link bytes of the direct run.
    """
    base = replace(spec, clients=1, workload=(), jitter_us=0.0)
    spx_run = run_scenario(replace(base, mode=Mode.SPX))
    e2e_run = run_scenario(replace(base, mode=Mode.E2E))
    adapter = spx_run.adapter()
    if adapter is None or not spx_run.all_succeeded:
        raise HandshakeFailure(f"{spec.label}: the SPX run did not establish a session")
    extra = link_bytes(spx_run.trace, EDGE, SERVER) - link_bytes(e2e_run.trace, client_name(1), SERVER)
    return Overhead(
        protocol_id=adapter.protocol_id,
        extra_rtts=spx_run.extra_rtts,
        extra_bytes=extra,
        expected_bytes=expected_extra_bytes(adapter),
        spx_bytes=spx_run.spx_bytes,
    )
