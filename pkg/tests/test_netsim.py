"""Tests for the discrete-event network, scenario building and the loopback runner."""

import json

import pytest

from spx.endpoint import Endpoint, Flight
from spx.exceptions import ConfigError, Deadlock
from spx.netsim import (
    EDGE,
    SERVER,
    TRACE_SCHEMA,
    Mode,
    Network,
    Protocol,
    ScenarioSpec,
    Topology,
    build_world,
    client_name,
    run_loopback,
    run_scenario,
)
from spx.wire import MsgType, WireMessage


class Pinger(Endpoint):
    """Sends one frame to ``peer`` and waits for a reply that may never come."""

    def __init__(self, name, peer):
        super().__init__(name)
        self.peer = peer
        self.replied = False

    def start(self, net):
        return [Flight.of(net.open(self.name, self.peer), WireMessage(MsgType.APPLICATION_DATA, b"ping"))]

    def on_message(self, net, conn, msg):
        self.replied = True
        return []

    def is_waiting(self):
        return not self.replied


class Silent(Endpoint):
    def on_message(self, net, conn, msg):
        return []


class Echo(Endpoint):
    def on_message(self, net, conn, msg):
        return [Flight.of(conn, msg)]


class TestTopology:
    def test_symmetric_links(self):
        topology = Topology(default_latency_us=7.0).set_latency("a", "b", 100.0)
        assert topology.latency("b", "a") == 100.0
        assert topology.latency("a", "c") == 7.0

    def test_negative_latency(self):
        with pytest.raises(ConfigError):
            Topology().set_latency("a", "b", -1.0)
        with pytest.raises(ConfigError):
            Topology(jitter_us=-1.0)

    def test_alias_copies_links(self):
        topology = Topology().set_latency("edge", "server", 451.0).set_latency("client-1", "edge", 482.0)
        topology.alias("attacker", like="edge")
        assert topology.latency("attacker", "server") == 451.0
        assert topology.latency("client-1", "attacker") == 482.0


class TestNetwork:
    def test_delivery_time_follows_latency(self):
        network = Network(Topology().set_latency("a", "b", 250.0))
        network.add(Pinger("a", "b"))
        network.add(Echo("b"))
        trace = network.run()
        assert [e.time_us for e in trace] == [250.0, 500.0]
        assert [e.link for e in trace] == ["a->b", "b->a"]

    def test_deadlock(self):
        network = Network()
        network.add(Pinger("a", "b"))
        network.add(Silent("b"))
        with pytest.raises(Deadlock):
            network.run()

    def test_deadlock_can_be_tolerated(self):
        network = Network()
        network.add(Pinger("a", "b"))
        network.add(Silent("b"))
        assert len(network.run(raise_on_deadlock=False)) == 1

    def test_duplicate_names(self):
        network = Network()
        network.add(Silent("a"))
        with pytest.raises(ValueError):
            network.add(Silent("a"))

    def test_compute_cost_serializes(self):
        network = Network()
        network.add(Pinger("a", "b"))
        echo = Echo("b", compute_cost_us=30.0)
        network.add(echo)
        trace = network.run()
        # b is busy with its own start until 30us, then takes 30us per frame
        assert [e.time_us for e in trace] == [30.0, 60.0]


class TestScenarios:
    @pytest.mark.parametrize("protocol", list(Protocol))
    def test_same_seed_same_trace(self, protocol):
        spec = ScenarioSpec(protocol=protocol, mode=Mode.SPX, workload=(3000,), jitter_us=40.0, seed=17)
        assert run_scenario(spec).trace.to_jsonl() == run_scenario(spec).trace.to_jsonl()

    def test_different_seed_different_trace(self):
        a = run_scenario(ScenarioSpec(seed=1)).trace.to_jsonl()
        b = run_scenario(ScenarioSpec(seed=2)).trace.to_jsonl()
        assert a != b

    def test_trace_header(self, tmp_path):
        result = run_scenario(ScenarioSpec(protocol=Protocol.TLX, mode=Mode.SPX, seed=3))
        path = result.trace.save(tmp_path / "trace.jsonl")
        lines = path.read_text().splitlines()
        header = json.loads(lines[0])
        assert header["schema"] == TRACE_SCHEMA
        assert header["scenario"] == "tlx/spx"
        assert header["seed"] == 3
        assert header["events"] == len(lines) - 1
        first = json.loads(lines[1])
        assert set(first) >= {"seq", "time_us", "src", "dst", "flight", "type", "spx", "bytes"}

    def test_spx_handshake_takes_longer_than_direct(self):
        spx = run_scenario(ScenarioSpec(mode=Mode.SPX)).client_outcomes[0]
        e2e = run_scenario(ScenarioSpec(mode=Mode.E2E)).client_outcomes[0]
        assert spx.handshake_us > e2e.handshake_us > 0

    def test_many_clients(self):
        result = run_scenario(ScenarioSpec(mode=Mode.SPX, clients=6, workload=(100,), stagger_us=10.0))
        assert result.all_succeeded
        assert len(result.world.edge.states) == 6
        assert len(result.world.edge_enclave.sessions) == 6

    def test_memory_cap_spills_but_serves(self):
        result = run_scenario(ScenarioSpec(mode=Mode.SPX, clients=4, workload=(100,), memory_cap_sessions=1))
        assert result.all_succeeded
        table = result.world.edge_enclave.sessions
        assert len(table.resident_ids()) <= 1
        assert table.spill_count >= 3

    def test_direct_mode_has_no_edge(self):
        result = run_scenario(ScenarioSpec(mode=Mode.E2E))
        assert EDGE not in result.outcomes
        assert result.extra_rtts == 0
        assert all(EDGE not in (e.src, e.dst) for e in result.trace)

    def test_every_client_frame_reaches_server_in_order(self):
        result = run_scenario(ScenarioSpec(mode=Mode.SPX, workload=(5000,)))
        sent = [e.msg.payload for e in result.trace if e.src == client_name(1)
                and e.msg.msg_type is MsgType.APPLICATION_DATA]
        arrived = [e.msg.payload for e in result.trace if e.dst == SERVER
                   and e.msg.msg_type is MsgType.APPLICATION_DATA]
        assert sent and sent == arrived

    def test_handshake_timeout(self):
        result = run_scenario(ScenarioSpec(mode=Mode.E2E, timeout_us=100.0))
        outcome = result.client_outcomes[0]
        assert not outcome.succeeded
        assert outcome.reason.startswith("HandshakeTimeout")
        assert outcome.handshake_us is None

    def test_too_few_clients(self):
        with pytest.raises(ConfigError):
            ScenarioSpec(clients=0)


class TestTopologyFile:
    def test_from_file(self, tmp_path):
        path = tmp_path / "topology.conf"
        path.write_text(
            "# two clients over NoiXe\n"
            "protocol = noixe\n"
            "mode = spx\n"
            "pattern = ik\n"
            "clients = 2\n"
            "workload = 100, 2000\n"
            "edge_server_us = 300\n"
            "memory_cap_sessions = none\n"
        )
        spec = ScenarioSpec.from_file(path)
        assert spec.protocol is Protocol.NOIXE
        assert spec.pattern == "IK"
        assert spec.workload == (100, 2000)
        assert spec.edge_server_us == 300.0
        assert spec.memory_cap_sessions is None
        assert run_scenario(spec).all_succeeded

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ScenarioSpec.from_mapping({"latency": "3"})

    def test_bad_value(self):
        with pytest.raises(ConfigError):
            ScenarioSpec.from_mapping({"clients": "many"})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ScenarioSpec.from_file(tmp_path / "absent.conf")


class TestLoopback:
    @pytest.mark.parametrize("protocol", list(Protocol))
    def test_spx_over_tcp(self, protocol):
        world = build_world(ScenarioSpec(protocol=protocol, mode=Mode.SPX, workload=(4096,), seed=8))
        result = run_loopback(list(world.network.endpoints.values()), timeout_s=30.0)
        client = world.client_outcomes()[0]
        assert client.succeeded
        assert client.echo_ok
        (state,) = world.edge.states.values()
        assert state.established
        assert world.observer.bytes_seen == 2 * 4096
        assert result.wall_seconds > 0
        assert any(e.msg.msg_type is MsgType.SPX_GRANT for e in result.trace)
