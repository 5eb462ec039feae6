"""Attack suite: relay adversaries against SPX and against the weak server variants."""

import time

import pytest

from spx.crypto_core import Entropy
from spx.exceptions import ConfigError
from spx.netsim import (
    AttackOutcome,
    Mode,
    Protocol,
    ScenarioSpec,
    attack_campaign,
    cuckoo_attack,
    passive_observation,
    run_attack,
    tocttou_attack,
)
from spx.netsim.attacks import MaliciousRelay

SCENARIOS = {
    "tlx": ScenarioSpec(protocol=Protocol.TLX),
    "noixe-xx": ScenarioSpec(protocol=Protocol.NOIXE, pattern="XX"),
    "noixe-ik": ScenarioSpec(protocol=Protocol.NOIXE, pattern="IK"),
}
SEEDS = range(100)
# Wall-clock limit for one 100-seed campaign.
CAMPAIGN_SECONDS = 10.0


@pytest.fixture(params=sorted(SCENARIOS))
def scenario(request):
    return SCENARIOS[request.param]


class TestCuckoo:
    def test_defeated_by_channel_binding(self, scenario):
        started = time.perf_counter()
        reports = attack_campaign("cuckoo", scenario, SEEDS)
        assert time.perf_counter() - started < CAMPAIGN_SECONDS
        assert all(r.defeated for r in reports)
        assert all(r.grant_opened is False for r in reports)
        assert all(r.stolen_plaintext_bytes == 0 for r in reports)
        assert all(r.server_ephemerals_left == 0 for r in reports)

    def test_succeeds_against_attest_after_connect(self, scenario):
        report = cuckoo_attack(scenario, strawman=True)
        assert report.outcome is AttackOutcome.SUCCEEDED
        assert report.grant_opened is True
        assert report.server_mode == "attest-after-connect"

    def test_enclave_refuses_foreign_key(self):
        report = cuckoo_attack(SCENARIOS["tlx"])
        assert any("refused" in note for note in report.notes)

    def test_stolen_plaintext_is_counted(self):
        report = cuckoo_attack(ScenarioSpec(protocol=Protocol.TLX, workload=(1000,)), strawman=True)
        assert report.stolen_plaintext_bytes >= 1000


class TestTocttou:
    def test_defeated_by_fresh_nonce(self, scenario):
        started = time.perf_counter()
        reports = attack_campaign("tocttou", scenario, SEEDS)
        assert time.perf_counter() - started < CAMPAIGN_SECONDS
        assert all(r.defeated for r in reports)
        assert all(r.grant_opened is not True for r in reports)
        assert [r.server_ephemerals_left for r in reports] == [0] * len(SEEDS)

    def test_succeeds_against_attest_before_connect(self, scenario):
        report = tocttou_attack(scenario, strawman=True)
        assert report.outcome is AttackOutcome.SUCCEEDED
        assert report.server_mode == "attest-before-connect"
        assert report.server_ephemerals_left == 0

    def test_replayed_report_is_captured(self):
        report = tocttou_attack(SCENARIOS["tlx"])
        assert any("captured" in note for note in report.notes)


class TestPassive:
    @pytest.mark.parametrize("protocol", list(Protocol))
    def test_keys_never_cross_the_wire(self, protocol):
        report = passive_observation(ScenarioSpec(protocol=protocol, mode=Mode.SPX, workload=(2048,)))
        assert report.defeated
        assert report.victim_status == "success"


class TestReports:
    def test_to_dict(self):
        data = cuckoo_attack(SCENARIOS["tlx"], strawman=True).to_dict()
        assert data["outcome"] == "AttackSucceeded"
        assert data["attack"] == "cuckoo"
        assert data["scenario"] == "tlx/spx"

    def test_unknown_attack(self):
        with pytest.raises(ConfigError):
            run_attack("rowhammer", SCENARIOS["tlx"])

    def test_passive_has_no_strawman(self):
        assert run_attack("passive", SCENARIOS["tlx"]).defeated
        with pytest.raises(ConfigError):
            run_attack("passive", SCENARIOS["tlx"], strawman=True)

    def test_campaign_uses_each_seed(self):
        reports = attack_campaign("cuckoo", SCENARIOS["tlx"], [3, 4])
        assert [r.seed for r in reports] == [3, 4]

    def test_relay_needs_a_bind_strategy(self):
        with pytest.raises(TypeError):
            MaliciousRelay("attacker", "server", Entropy(1), adapters=[])
