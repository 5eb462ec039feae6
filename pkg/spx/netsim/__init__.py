"""In-process network simulation, scenario builder, attacks and the loopback runner."""

from .attacks import (
    ATTACKS,
    TOCTTOU_DELAY_US,
    AttackOutcome,
    AttackReport,
    CuckooRelay,
    MaliciousRelay,
    PassiveObserver,
    TocttouRelay,
    attack_campaign,
    cuckoo_attack,
    passive_observation,
    run_attack,
    tocttou_attack,
)
from .loopback import LoopbackResult, LoopbackRunner, run_loopback
from .network import TRACE_SCHEMA, Network, Topology, Trace, TraceEvent
from .scenarios import (
    ATTACKER,
    EDGE,
    EDGE_MANIFEST,
    SERVER,
    SERVER_MANIFEST,
    Mode,
    Overhead,
    Protocol,
    ScenarioResult,
    ScenarioSpec,
    World,
    build_world,
    client_name,
    measure_overhead,
    run_scenario,
    run_world,
)

__all__ = [
    "ATTACKS",
    "TOCTTOU_DELAY_US",
    "AttackOutcome",
    "AttackReport",
    "CuckooRelay",
    "MaliciousRelay",
    "PassiveObserver",
    "TocttouRelay",
    "attack_campaign",
    "cuckoo_attack",
    "passive_observation",
    "run_attack",
    "tocttou_attack",
    "LoopbackResult",
    "LoopbackRunner",
    "run_loopback",
    "TRACE_SCHEMA",
    "Network",
    "Topology",
    "Trace",
    "TraceEvent",
    "ATTACKER",
    "EDGE",
    "EDGE_MANIFEST",
    "SERVER",
    "SERVER_MANIFEST",
    "Mode",
    "Overhead",
    "Protocol",
    "ScenarioResult",
    "ScenarioSpec",
    "World",
    "build_world",
    "client_name",
    "measure_overhead",
    "run_scenario",
    "run_world",
]
