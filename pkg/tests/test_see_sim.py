"""Tests for the simulated enclave: reports, sealing and the session table."""

import numpy as np
import pytest
from hypothesis import strategies as st
from hypothesis.stateful import RuleBasedStateMachine, invariant, precondition, rule

from spx.crypto_core import Entropy, SymmetricKey
from spx.exceptions import AuthFailure, ForeignKey, NotFound, WireError
from spx.see_sim import (
    REPORT_SIZE,
    SESSION_SLOT_BYTES,
    SPX_NONCE_SIZE,
    AttestationReport,
    DirectoryHostStore,
    MemoryHostStore,
    Platform,
    RejectReason,
    SpxSession,
    measure,
    verify_report,
)

MANIFEST = b"edge-function:test:v1"


@pytest.fixture
def platform():
    return Platform(Entropy(5))


@pytest.fixture
def enclave(platform):
    return platform.launch("edge", MANIFEST)


def make_session(i: int, key_byte: int = 0xAB) -> SpxSession:
    return SpxSession(
        session_id=f"s{i}",
        protocol_id="tlx/1.2",
        session_key=SymmetricKey(bytes([key_byte]) * 32),
        client_id="client",
        server_id="server",
    )


class TestAttestation:
    def test_report_is_512_bytes(self, enclave):
        pub = enclave.gen_ephemeral().public
        report = enclave.attest(pub, b"\x01" * SPX_NONCE_SIZE)
        assert len(report.to_bytes()) == REPORT_SIZE
        assert AttestationReport.from_bytes(report.to_bytes()) == report

    def test_accepts_fresh_report(self, enclave, platform):
        pub = enclave.gen_ephemeral().public
        nonce = enclave.fresh_nonce()
        report = enclave.attest(pub, nonce)
        assert verify_report(report, measure(MANIFEST), nonce, platform.public_key)

    def test_measurement_mismatch(self, enclave, platform):
        pub = enclave.gen_ephemeral().public
        report = enclave.attest(pub, bytes(16))
        verdict = verify_report(report, measure(b"other"), bytes(16), platform.public_key)
        assert verdict.reason is RejectReason.MEASUREMENT_MISMATCH

    def test_stale_nonce(self, enclave, platform):
        pub = enclave.gen_ephemeral().public
        report = enclave.attest(pub, bytes(16))
        verdict = verify_report(report, measure(MANIFEST), b"\x02" * 16, platform.public_key)
        assert verdict.reason is RejectReason.FRESHNESS_MISMATCH
        assert str(verdict) == "Reject(FreshnessMismatch)"

    def test_binding_mismatch(self, enclave, platform):
        pub = enclave.gen_ephemeral().public
        report = enclave.attest(pub, bytes(16), binding=b"\x07" * 32)
        assert report.binding == b"\x07" * 32
        verdict = verify_report(report, measure(MANIFEST), bytes(16), platform.public_key, b"\x08" * 32)
        assert verdict.reason is RejectReason.BINDING_MISMATCH

    def test_tampered_report_is_bad_signature(self, enclave, platform):
        pub = enclave.gen_ephemeral().public
        raw = bytearray(enclave.attest(pub, bytes(16)).to_bytes())
        raw[40] ^= 1
        verdict = verify_report(AttestationReport.from_bytes(bytes(raw)), measure(MANIFEST), bytes(16), platform.public_key)
        assert verdict.reason is RejectReason.BAD_SIGNATURE

    def test_other_platform_is_bad_signature(self, enclave):
        pub = enclave.gen_ephemeral().public
        report = enclave.attest(pub, bytes(16))
        other = Platform(Entropy(6))
        verdict = verify_report(report, measure(MANIFEST), bytes(16), other.public_key)
        assert verdict.reason is RejectReason.BAD_SIGNATURE

    def test_foreign_key_refused(self, enclave):
        with pytest.raises(ForeignKey):
            enclave.attest(b"\x09" * 32, bytes(16))

    def test_host_surface_sees_only_public_values(self, enclave):
        surface = enclave.surface()
        pub = surface.gen_ephemeral()
        assert isinstance(pub, bytes) and len(pub) == 32
        assert surface.attest(pub, bytes(16)).ephemeral_public == pub
        assert surface.measurement == measure(MANIFEST)
        with pytest.raises(ForeignKey):
            surface.attest(b"\x05" * 32, bytes(16))

    def test_wrong_report_length(self):
        with pytest.raises(WireError):
            AttestationReport.from_bytes(bytes(REPORT_SIZE - 1))

    def test_one_enclave_per_function(self, platform):
        platform.launch("fn", MANIFEST)
        with pytest.raises(ValueError):
            platform.launch("fn", MANIFEST)

    def test_instance_ids_differ(self, platform):
        a = platform.launch("a", MANIFEST)
        b = platform.launch("b", MANIFEST)
        assert a.measurement == b.measurement
        assert a.instance_id != b.instance_id


class TestSealing:
    def test_seal_round_trip(self, enclave):
        session = make_session(1)
        assert enclave.unseal(enclave.seal(session)) == session

    def test_other_enclave_cannot_unseal(self, platform, enclave):
        other = platform.launch("other", MANIFEST)
        with pytest.raises(AuthFailure):
            other.unseal(enclave.seal(make_session(1)))

    def test_sealed_blob_hides_key(self, enclave):
        session = make_session(1, key_byte=0x5C)
        blob = enclave.seal(session)
        assert session.session_key.bytes not in blob.to_bytes()
        assert session.session_key.bytes.hex().encode() not in blob.to_bytes()


class TestSessionTable:
    def test_unbounded_never_spills(self, enclave):
        for i in range(20):
            enclave.session_put(make_session(i))
        assert enclave.sessions.spill_count == 0
        assert len(enclave.sessions) == 20

    def test_cap_spills_least_recent(self, platform):
        enclave = platform.launch("capped", MANIFEST, memory_cap_bytes=2 * SESSION_SLOT_BYTES)
        for i in range(3):
            enclave.session_put(make_session(i))
        assert enclave.sessions.resident_ids() == ["s1", "s2"]
        assert "s0" in enclave.sessions.host_store
        assert enclave.session_get("s0") == make_session(0)
        assert enclave.sessions.unseal_count == 1
        assert "s1" in enclave.sessions.host_store

    def test_zero_cap_still_serves(self, platform):
        enclave = platform.launch("zero", MANIFEST, memory_cap_bytes=0)
        enclave.session_put(make_session(1))
        assert enclave.sessions.resident_ids() == []
        assert enclave.session_get("s1") == make_session(1)

    def test_missing_session(self, enclave):
        with pytest.raises(NotFound):
            enclave.session_get("nope")

    def test_unsafe_session_id(self, enclave):
        with pytest.raises(ValueError):
            enclave.session_put(SpxSession(
                session_id="../etc", protocol_id="p", session_key=SymmetricKey(bytes(32)),
                client_id="c", server_id="s",
            ))

    def test_directory_store(self, platform, tmp_path):
        store = DirectoryHostStore(str(tmp_path / "spill"))
        enclave = platform.launch("disk", MANIFEST, memory_cap_bytes=SESSION_SLOT_BYTES, host_store=store)
        for i in range(3):
            enclave.session_put(make_session(i, key_byte=0x42))
        assert len(store) == 2
        assert sorted(p.name for p in (tmp_path / "spill").iterdir()) == ["s0", "s1"]
        for blob in store.raw_items():
            assert bytes([0x42]) * 32 not in blob
        assert enclave.session_get("s0") == make_session(0, key_byte=0x42)

    @pytest.mark.parametrize("cap_sessions", [1, 2, 8])
    def test_matches_unbounded_map(self, platform, cap_sessions):
        store = MemoryHostStore()
        enclave = platform.launch(f"oracle-{cap_sessions}", MANIFEST,
                                  memory_cap_bytes=cap_sessions * SESSION_SLOT_BYTES, host_store=store)
        oracle = {}
        rng = np.random.default_rng(cap_sessions)
        for step in range(1000):
            i = int(rng.integers(0, 24))
            if rng.random() < 0.5:
                session = make_session(i, key_byte=int(rng.integers(1, 256)))
                enclave.session_put(session)
                oracle[session.session_id] = session
            elif f"s{i}" in oracle:
                assert enclave.session_get(f"s{i}") == oracle[f"s{i}"]
            else:
                with pytest.raises(NotFound):
                    enclave.session_get(f"s{i}")
            assert len(enclave.sessions.resident_ids()) <= cap_sessions
            assert len(enclave.sessions) == len(oracle)
        for session in oracle.values():
            for blob in store.raw_items():
                assert session.session_key.bytes not in blob


class SessionTableMachine(RuleBasedStateMachine):
    """Random put/get sequences against a plain dict."""

    def __init__(self):
        super().__init__()
        self.enclave = Platform(Entropy(9)).launch("machine", MANIFEST, memory_cap_bytes=3 * SESSION_SLOT_BYTES)
        self.oracle = {}

    @rule(i=st.integers(0, 10), key=st.integers(0, 255))
    def put(self, i, key):
        session = make_session(i, key_byte=key)
        self.enclave.session_put(session)
        self.oracle[session.session_id] = session

    @precondition(lambda self: self.oracle)
    @rule(data=st.data())
    def get_known(self, data):
        session_id = data.draw(st.sampled_from(sorted(self.oracle)))
        assert self.enclave.session_get(session_id) == self.oracle[session_id]

    @rule(i=st.integers(11, 20))
    def get_unknown(self, i):
        with pytest.raises(NotFound):
            self.enclave.session_get(f"s{i}")

    @invariant()
    def sizes_agree(self):
        assert len(self.enclave.sessions) == len(self.oracle)
        assert self.enclave.sessions.resident_bytes <= 3 * SESSION_SLOT_BYTES


TestSessionTableMachine = SessionTableMachine.TestCase
