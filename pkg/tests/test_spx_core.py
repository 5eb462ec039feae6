"""Tests for the protocol-agnostic SPX engine."""

import itertools
from types import SimpleNamespace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from spx.crypto_core import Entropy, SymmetricKey, generate_signing_keypair
from spx.endpoint import OutcomeStatus
from spx.exceptions import AttestationInvalid, AuthFailure, ForeignKey, NoNonce, ProtocolViolation, WireError
from spx.netsim import EDGE, EDGE_MANIFEST, SERVER, SERVER_MANIFEST, Mode, Protocol, ScenarioSpec, build_world, run_world
from spx.see_sim import REPORT_SIZE, SPX_NONCE_SIZE, Platform, measure
from spx.spx_core import (
    PASS_THROUGH,
    UNSUPPORTED,
    EdgeTrust,
    OfferStatus,
    Phase,
    SpxEdgeState,
    SpxOffer,
    SpxRequest,
    SpxServerPolicy,
    bind,
    can_transition,
    detect,
    extra_rtts,
    flights,
    grant_accept,
    grant_message_bytes,
    link_bytes,
    offer_context,
    open_grant,
    parse_grant,
    resume,
    seal_grant,
    spx_bytes,
)
from spx.spx_core.messages import attestation_frame
from spx.wire import MsgType, WireMessage, add_extension, encode, pack_body

HAPPY_PATH = [Phase.IDLE, Phase.DETECTED, Phase.RELAYING, Phase.BOUND, Phase.GRANTED, Phase.ESTABLISHED]


@pytest.fixture
def platform():
    return Platform(Entropy(21))


@pytest.fixture
def edge_enclave(platform):
    return platform.launch(EDGE, EDGE_MANIFEST)


@pytest.fixture
def server_enclave(platform):
    return platform.launch(SERVER, SERVER_MANIFEST)


@pytest.fixture
def signing_key():
    return generate_signing_keypair(Entropy(22))


@pytest.fixture
def policy(platform, server_enclave, signing_key):
    return SpxServerPolicy(
        signing_key=signing_key,
        enclave=server_enclave,
        edge_measurement=measure(EDGE_MANIFEST),
        platform_public=platform.public_key,
    )


@pytest.fixture
def edge_state(platform, edge_enclave, signing_key):
    trust = EdgeTrust(
        server_pin=signing_key.public,
        server_measurement=measure(SERVER_MANIFEST),
        platform_public=platform.public_key,
    )
    return SpxEdgeState(enclave=edge_enclave, trust=trust, session_id="edge-000001", client_id="c1")


class TestPhases:
    def test_happy_path_is_legal(self):
        for current, target in zip(HAPPY_PATH, HAPPY_PATH[1:]):
            assert can_transition(current, target)

    @pytest.mark.parametrize("current,target", [
        (Phase.IDLE, Phase.BOUND),
        (Phase.RELAYING, Phase.GRANTED),
        (Phase.ESTABLISHED, Phase.IDLE),
        (Phase.ABORTED, Phase.DETECTED),
        (Phase.ABORTED, Phase.ABORTED),
    ])
    def test_illegal_transitions(self, current, target):
        assert not can_transition(current, target)

    def test_any_live_phase_can_abort(self):
        assert all(can_transition(p, Phase.ABORTED) for p in Phase if p is not Phase.ABORTED)

    def test_advance_rejects_skips(self, edge_state):
        with pytest.raises(ProtocolViolation):
            edge_state.advance(Phase.BOUND)

    def test_abort_keeps_first_reason(self, edge_state):
        edge_state.abort("first")
        edge_state.abort("second")
        assert edge_state.phase is Phase.ABORTED
        assert edge_state.abort_reason == "first"

    def test_fall_back_erases_ephemeral(self, edge_state):
        edge_state.ephemeral = edge_state.enclave.gen_ephemeral()
        public = edge_state.ephemeral.public
        edge_state.fall_back("not capable")
        assert edge_state.pass_through
        assert edge_state.ephemeral is None
        with pytest.raises(ForeignKey):
            edge_state.enclave.attest(public, bytes(SPX_NONCE_SIZE))

    def test_abort_erases_ephemeral(self, edge_state):
        edge_state.ephemeral = edge_state.enclave.gen_ephemeral()
        edge_state.abort("server aborted")
        assert edge_state.ephemeral is None
        assert edge_state.enclave.live_ephemerals == 0

    def test_no_trace_grants_without_binding(self):
        granted_unbound = []
        for attempts in itertools.product(Phase, repeat=6):
            phase, seen = Phase.IDLE, [Phase.IDLE]
            for target in attempts:
                if can_transition(phase, target):
                    phase = target
                    seen.append(target)
            if Phase.GRANTED in seen and Phase.BOUND not in seen[: seen.index(Phase.GRANTED)]:
                granted_unbound.append(attempts)
            if Phase.ESTABLISHED in seen:
                assert seen[: seen.index(Phase.ESTABLISHED)] == HAPPY_PATH[:-1]
        assert granted_unbound == []


class TestExtensions:
    def test_request_round_trip(self):
        request = SpxRequest(b"\x03" * SPX_NONCE_SIZE)
        assert SpxRequest.from_extension(request.to_extension()) == request

    def test_request_wrong_size(self):
        ext = SpxRequest(b"\x03" * SPX_NONCE_SIZE).to_extension()
        with pytest.raises(WireError):
            SpxRequest.from_extension(type(ext)(ext.ext_type, ext.value[:-1]))

    def test_offer_signature(self, signing_key):
        edge_nonce, context = b"\x01" * SPX_NONCE_SIZE, b"\x02" * 32
        offer = SpxOffer.create(signing_key, b"\x04" * SPX_NONCE_SIZE, b"\x05" * 32, edge_nonce, context)
        parsed = SpxOffer.from_extension(offer.to_extension())
        assert parsed == offer
        assert parsed.verify(signing_key.public, edge_nonce, context)
        assert not parsed.verify(signing_key.public, b"\x09" * SPX_NONCE_SIZE, context)
        assert not parsed.verify(signing_key.public, edge_nonce, b"\x09" * 32)
        assert not parsed.verify(generate_signing_keypair(Entropy(1)).public, edge_nonce, context)

    def test_not_capable(self, signing_key):
        offer = SpxOffer.from_extension(SpxOffer.not_capable().to_extension())
        assert offer.status is OfferStatus.NOT_CAPABLE
        assert not offer.capable
        assert not offer.verify(signing_key.public, bytes(SPX_NONCE_SIZE), b"")

    def test_offer_context_ignores_spx_request(self):
        hello = WireMessage(MsgType.CLIENT_HELLO, pack_body(b"hello"))
        tagged = WireMessage(
            MsgType.CLIENT_HELLO,
            add_extension(hello.payload, SpxRequest(b"\x07" * SPX_NONCE_SIZE).to_extension()),
        )
        assert offer_context(tagged) == offer_context(hello)


class TestGrant:
    def test_seal_open(self, edge_enclave, server_enclave):
        edge_key, server_key = edge_enclave.gen_ephemeral(), server_enclave.gen_ephemeral()
        binding, nonce, secret = b"\x0b" * 32, b"\x0c" * SPX_NONCE_SIZE, b"secret" * 10
        sealed = seal_grant(server_key, edge_key.public, binding, nonce, secret)
        assert open_grant(edge_key, server_key.public, binding, nonce, sealed) == secret
        with pytest.raises(AuthFailure):
            open_grant(edge_key, server_key.public, b"\x0d" * 32, nonce, sealed)
        with pytest.raises(AuthFailure):
            open_grant(edge_key, server_key.public, binding, b"\x0e" * SPX_NONCE_SIZE, sealed)

    def test_server_session_bind_and_grant(self, policy, edge_enclave):
        edge_key = edge_enclave.gen_ephemeral()
        edge_nonce = edge_enclave.fresh_nonce()
        session = policy.open_session(SpxRequest(edge_nonce), b"\x00" * 32)
        binding = b"\x42" * 32
        report = edge_enclave.attest(edge_key.public, session.nonce, binding)
        session.accept_bind(attestation_frame(report), binding)
        assert session.bound
        frame = session.issue_grant(b"k" * 64)
        assert len(encode(frame)) == grant_message_bytes(64)
        server_report, sealed = parse_grant(frame)
        assert server_report.ephemeral_public == session.offer.grant_public
        assert open_grant(edge_key, server_report.ephemeral_public, binding, session.nonce, sealed) == b"k" * 64

    def test_grant_message_size(self):
        assert grant_message_bytes(128) - grant_message_bytes(0) == 128
        assert grant_message_bytes(0) > REPORT_SIZE

    def test_binding_mismatch_rejected(self, policy, edge_enclave):
        edge_key = edge_enclave.gen_ephemeral()
        session = policy.open_session(SpxRequest(edge_enclave.fresh_nonce()), b"")
        report = edge_enclave.attest(edge_key.public, session.nonce, b"\x01" * 32)
        with pytest.raises(AttestationInvalid):
            session.accept_bind(attestation_frame(report), b"\x02" * 32)
        assert not session.bound

    def test_stale_nonce_rejected(self, policy, edge_enclave):
        edge_key = edge_enclave.gen_ephemeral()
        session = policy.open_session(SpxRequest(edge_enclave.fresh_nonce()), b"")
        report = edge_enclave.attest(edge_key.public, b"\x00" * SPX_NONCE_SIZE, b"\x01" * 32)
        with pytest.raises(AttestationInvalid):
            session.accept_bind(attestation_frame(report), b"\x01" * 32)

    def test_grant_before_bind(self, policy, edge_enclave):
        session = policy.open_session(SpxRequest(edge_enclave.fresh_nonce()), b"")
        with pytest.raises(ProtocolViolation):
            session.issue_grant(b"k" * 32)

    def test_wrong_bind_frame(self, policy, edge_enclave):
        session = policy.open_session(SpxRequest(edge_enclave.fresh_nonce()), b"")
        with pytest.raises(ProtocolViolation):
            session.accept_bind(WireMessage(MsgType.SPX_GRANT, bytes(REPORT_SIZE + 16)), b"")

    def test_single_grant(self, policy, edge_enclave):
        edge_key = edge_enclave.gen_ephemeral()
        session = policy.open_session(SpxRequest(edge_enclave.fresh_nonce()), b"")
        report = edge_enclave.attest(edge_key.public, session.nonce, b"\x01" * 32)
        session.accept_bind(attestation_frame(report), b"\x01" * 32)
        session.issue_grant(b"k" * 32)
        with pytest.raises(ProtocolViolation):
            session.issue_grant(b"k" * 32)
        with pytest.raises(ProtocolViolation):
            session.accept_bind(attestation_frame(report), b"\x01" * 32)

    def test_parse_grant_too_short(self):
        with pytest.raises(WireError):
            parse_grant(WireMessage(MsgType.SPX_GRANT, bytes(REPORT_SIZE)))

    def test_grant_erases_server_key(self, policy, edge_enclave, server_enclave):
        edge_key = edge_enclave.gen_ephemeral()
        session = policy.open_session(SpxRequest(edge_enclave.fresh_nonce()), b"")
        report = edge_enclave.attest(edge_key.public, session.nonce, b"\x01" * 32)
        session.accept_bind(attestation_frame(report), b"\x01" * 32)
        session.issue_grant(b"k" * 32)
        assert server_enclave.live_ephemerals == 0

    def test_close_erases_unused_grant_keys(self, policy, edge_enclave, server_enclave):
        sessions = [policy.open_session(SpxRequest(edge_enclave.fresh_nonce()), b"") for _ in range(50)]
        assert server_enclave.live_ephemerals == 50
        for session in sessions:
            session.close()
        assert server_enclave.live_ephemerals == 0

    def test_no_grant_after_close(self, policy, edge_enclave):
        edge_key = edge_enclave.gen_ephemeral()
        session = policy.open_session(SpxRequest(edge_enclave.fresh_nonce()), b"")
        report = edge_enclave.attest(edge_key.public, session.nonce, b"\x01" * 32)
        session.accept_bind(attestation_frame(report), b"\x01" * 32)
        session.close()
        with pytest.raises(ProtocolViolation):
            session.issue_grant(b"k" * 32)

    def test_forget_drops_registration_challenge(self, policy):
        policy.on_registration("edge->server#1", WireMessage(MsgType.SPX_REGISTER, b"edge"))
        attestation = WireMessage(MsgType.SPX_ATTESTATION)
        assert policy.handles_registration("edge->server#1", attestation)
        policy.forget("edge->server#1")
        assert not policy.handles_registration("edge->server#1", attestation)


def _pair_parties(seed):
    platform = Platform(Entropy(seed))
    edge_enclave = platform.launch(EDGE, EDGE_MANIFEST)
    signing_key = generate_signing_keypair(Entropy(seed + 1))
    policy = SpxServerPolicy(
        signing_key=signing_key,
        enclave=platform.launch(SERVER, SERVER_MANIFEST),
        edge_measurement=measure(EDGE_MANIFEST),
        platform_public=platform.public_key,
    )
    trust = EdgeTrust(
        server_pin=signing_key.public,
        server_measurement=measure(SERVER_MANIFEST),
        platform_public=platform.public_key,
    )
    return edge_enclave, policy, trust


def _bound_session(edge_enclave, policy, trust, index, binding):
    """An edge state in Bound and the server session it talks to, without a handshake."""
    state = SpxEdgeState(
        enclave=edge_enclave,
        trust=trust,
        session_id=f"edge-{index:06d}",
        client_id=f"client-{index}->edge#{index}",
        channel_id=f"edge->server#{index}",
        protocol_id="TLX",
        adapter=SimpleNamespace(install_grant=lambda secret: (SymmetricKey(secret), None)),
    )
    state.advance(Phase.DETECTED)
    state.ephemeral = edge_enclave.gen_ephemeral()
    state.edge_nonce = edge_enclave.fresh_nonce()
    state.advance(Phase.RELAYING)
    server = policy.open_session(SpxRequest(state.edge_nonce), b"")
    state.offer, state.server_nonce = server.offer, server.nonce
    state.binding = binding
    state.advance(Phase.BOUND)
    return state, server


GRANT_SECRET = bytes(range(32))
bindings = st.lists(st.binary(min_size=32, max_size=32), min_size=2, max_size=2, unique=True)


class TestBindingAcrossSessions:
    """Two concurrent sessions on one edge: each grant only opens for its own (nonce, key, connection)."""

    @given(seed=st.integers(min_value=0, max_value=2**16), pair=bindings)
    def test_matching_tuple_is_granted(self, seed, pair):
        edge_enclave, policy, trust = _pair_parties(seed)
        a, a_server = _bound_session(edge_enclave, policy, trust, 1, pair[0])
        _bound_session(edge_enclave, policy, trust, 2, pair[1])
        report = edge_enclave.attest(a.ephemeral.public, a_server.nonce, a.binding)
        a_server.accept_bind(attestation_frame(report), a.binding)
        session = grant_accept(a, a_server.issue_grant(GRANT_SECRET), a.channel_id)
        assert session.session_key.bytes == GRANT_SECRET
        assert a.phase is Phase.ESTABLISHED

    @given(
        seed=st.integers(min_value=0, max_value=2**16),
        pair=bindings,
        swapped=st.sampled_from(["nonce", "ephemeral", "binding", "connection", "report"]),
    )
    def test_permuted_tuple_aborts(self, seed, pair, swapped):
        edge_enclave, policy, trust = _pair_parties(seed)
        a, a_server = _bound_session(edge_enclave, policy, trust, 1, pair[0])
        b, b_server = _bound_session(edge_enclave, policy, trust, 2, pair[1])
        nonce, key, binding, conn = a_server.nonce, a.ephemeral.public, a.binding, a.channel_id
        if swapped == "nonce":
            nonce = b_server.nonce
        elif swapped == "ephemeral":
            key = b.ephemeral.public
        elif swapped == "binding":
            binding = b.binding
        elif swapped == "connection":
            conn = b.channel_id
        else:
            nonce, key, binding = b_server.nonce, b.ephemeral.public, b.binding
        report = edge_enclave.attest(key, nonce, binding)
        with pytest.raises((AttestationInvalid, AuthFailure, ProtocolViolation)):
            a_server.accept_bind(attestation_frame(report), a.binding)
            grant_accept(a, a_server.issue_grant(GRANT_SECRET), conn)
        assert a.session is None
        assert a.phase is Phase.BOUND


class TestOperations:
    def test_unknown_protocol_passes_through(self, edge_state):
        hello = WireMessage(MsgType.CLIENT_HELLO, pack_body(b"other protocol"))
        assert detect(edge_state, hello, [lambda msg: None]) is PASS_THROUGH
        assert edge_state.pass_through
        assert edge_state.phase is Phase.IDLE

    def test_detect_twice(self, edge_state):
        edge_state.advance(Phase.DETECTED)
        with pytest.raises(ProtocolViolation):
            detect(edge_state, WireMessage(MsgType.CLIENT_HELLO), [])

    def test_bind_without_nonce(self, edge_state):
        with pytest.raises(NoNonce):
            bind(edge_state)

    def test_grant_outside_bound(self, edge_state):
        with pytest.raises(ProtocolViolation):
            grant_accept(edge_state, WireMessage(MsgType.SPX_GRANT, bytes(REPORT_SIZE + 16)))

    def test_resume_is_unsupported(self, edge_state):
        assert resume(edge_state, b"ticket") is UNSUPPORTED


def _event(src, dst, flight_id, msg_type, size=10):
    return SimpleNamespace(src=src, dst=dst, flight_id=flight_id, msg=WireMessage(msg_type), byte_count=size)


class TestAccounting:
    events = [
        _event("client-1", "edge", 1, MsgType.CLIENT_HELLO, 40),
        _event("edge", "server", 2, MsgType.CLIENT_HELLO, 60),
        _event("server", "edge", 3, MsgType.SERVER_HELLO, 50),
        _event("server", "edge", 3, MsgType.FINISHED, 20),
        _event("edge", "server", 4, MsgType.SPX_ATTESTATION, 518),
        _event("server", "edge", 5, MsgType.SPX_GRANT, 600),
        _event("edge", "server", 6, MsgType.FINISHED, 20),
        _event("edge", "server", 6, MsgType.SPX_ATTESTATION, 518),
    ]

    def test_link_bytes(self):
        assert link_bytes(self.events, "edge", "server") == 60 + 50 + 20 + 518 + 600 + 20 + 518
        assert link_bytes(self.events, "server", "edge") == link_bytes(self.events, "edge", "server")

    def test_flights_group_by_id(self):
        grouped = flights(self.events, "edge", "server")
        assert list(grouped) == [2, 3, 4, 5, 6]
        assert len(grouped[3]) == 2

    def test_piggybacked_spx_frames_are_not_extra_rtts(self):
        assert extra_rtts(self.events, "edge", "server") == 2

    def test_spx_bytes(self):
        assert spx_bytes(self.events, "edge", "server") == 518 + 600 + 518


class TestEdgeFunction:
    @pytest.mark.parametrize("protocol", list(Protocol))
    def test_phase_history(self, protocol):
        world = build_world(ScenarioSpec(protocol=protocol, mode=Mode.SPX, workload=(512,)))
        run_world(world)
        (state,) = world.edge.states.values()
        assert state.history == HAPPY_PATH
        assert state.ephemeral is None
        assert world.edge_enclave.session_get(state.session_id) == state.session
        assert world.observer.bytes_seen == 2 * 512

    @pytest.mark.parametrize("protocol", list(Protocol))
    def test_server_without_spx_falls_back(self, protocol):
        world = build_world(ScenarioSpec(protocol=protocol, mode=Mode.SPX, workload=(512,)))
        world.server.spx_policy = None
        result = run_world(world)
        assert result.all_succeeded
        (state,) = world.edge.states.values()
        assert state.pass_through
        assert state.session is None
        assert result.outcomes[EDGE][0].status is OutcomeStatus.PASS_THROUGH
        assert world.observer.bytes_seen == 0
        assert result.extra_rtts == 0

    def test_unrecognised_client_passes_through(self):
        world = build_world(ScenarioSpec(protocol=Protocol.TLX, mode=Mode.SPX))
        world.edge.adapters = []
        result = run_world(world)
        assert result.all_succeeded
        assert result.spx_bytes == 0

    @pytest.mark.parametrize("protocol", list(Protocol))
    def test_rejected_bind_leaves_no_keys(self, protocol):
        world = build_world(ScenarioSpec(protocol=protocol, mode=Mode.SPX))
        world.policy.edge_measurement = measure(b"some other edge function")
        result = run_world(world, raise_on_deadlock=False)
        assert not result.all_succeeded
        assert world.server_enclave.live_ephemerals == 0
        assert world.edge_enclave.live_ephemerals == 0

    @pytest.mark.parametrize("protocol", list(Protocol))
    def test_completed_run_leaves_no_keys(self, protocol):
        world = build_world(ScenarioSpec(protocol=protocol, mode=Mode.SPX, clients=3))
        assert run_world(world).all_succeeded
        assert world.server_enclave.live_ephemerals == 0
        assert world.edge_enclave.live_ephemerals == 0


class _Replay:
    """Network context for feeding recorded frames straight into an edge."""

    now = 0.0

    def __init__(self, upstream: str):
        self.upstream = upstream

    def open(self, src, dst):
        return self.upstream

    def set_timer(self, endpoint, delay_us, token):
        pass


class TestReorderedEdgeTraces:
    """Every reordering of the frames around the grant, fed to a fresh edge built from the same seed."""

    WINDOW = 6

    @pytest.fixture(scope="class")
    def recorded(self):
        spec = ScenarioSpec(protocol=Protocol.TLX, mode=Mode.SPX, seed=5)
        world = build_world(spec)
        trace = run_world(world).trace
        inbound = [e for e in trace.events if e.dst == EDGE]
        upstream = next(e.conn for e in trace.events if e.src == EDGE and e.dst == SERVER)
        (state,) = world.edge.states.values()
        return spec, inbound, upstream, state.session.session_key.bytes

    def _replay(self, spec, events, upstream):
        world = build_world(spec)
        net = _Replay(upstream)
        for event in events:
            world.edge.on_flight(net, event.conn, [event.msg])
        return world.edge.states

    def test_recorded_order_is_granted(self, recorded):
        spec, inbound, upstream, key = recorded
        (state,) = self._replay(spec, inbound, upstream).values()
        assert state.history == HAPPY_PATH
        assert state.session.session_key.bytes == key

    def test_no_reordering_grants_without_binding(self, recorded):
        spec, inbound, upstream, key = recorded
        grant = next(i for i, e in enumerate(inbound) if e.msg.msg_type is MsgType.SPX_GRANT)
        start = max(1, grant + 1 - self.WINDOW)
        head, window, tail = inbound[:start], inbound[start:grant + 1], inbound[grant + 1:]
        established = 0
        for order in itertools.permutations(window):
            for state in self._replay(spec, head + list(order) + tail, upstream).values():
                if Phase.GRANTED in state.history:
                    assert Phase.BOUND in state.history[: state.history.index(Phase.GRANTED)]
                if state.established:
                    established += 1
                    assert state.session.session_key.bytes == key
        assert established >= 1
