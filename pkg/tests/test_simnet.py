import json
import random

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from betauav.simnet import (Action, InvalidScenario, Scenario, Simulator, all_pairs_scenario,
                            attack_impersonate, attack_mitm, attack_modify, attack_replay,
                            default_scenario, flip_bits, run_scenario)


def _outcomes(scenario):
    transcript, _ = run_scenario(scenario)
    return transcript.outcomes()


def test_honest_default_run():
    assert _outcomes(default_scenario()) == ["HandshakeOk"] * 2 + ["Accept"] * 3


def test_transcript_is_reproducible():
    a, _ = run_scenario(default_scenario(seed=7))
    b, _ = run_scenario(default_scenario(seed=7))
    assert a.to_text() == b.to_text()
    c, _ = run_scenario(default_scenario(seed=8))
    assert c.to_text() != a.to_text()


def test_transcript_entries_well_formed():
    transcript, metrics = run_scenario(default_scenario())
    for e in transcript:
        assert e.deliver_time >= e.send_time
    assert set(metrics.per_actor) == {"uav0", "uav1"}
    assert metrics.totals()["sign"] == 5


def _boundary_scenario(offset):
    return Scenario(t_s=5000, schedule=[
        Action(0, "uav0", "handshake", "uav1"),
        Action(5000 + offset, "uav0", "data", "uav1", b"edge"),
    ]).validate()


def test_session_boundary_propagates():
    assert _outcomes(_boundary_scenario(0))[-1] == "Accept"
    assert _outcomes(_boundary_scenario(1))[-1] == "Reject(SessionExpired)"


def test_data_without_handshake():
    s = Scenario(schedule=[Action(0, "uav0", "data", "uav1", b"x")]).validate()
    assert _outcomes(s) == ["Reject(NoSession)"]


def test_revoked_terminal_cannot_handshake():
    s = Scenario(schedule=[Action(0, "uav0", "revoke"),
                           Action(10, "uav0", "handshake", "uav1")]).validate()
    assert _outcomes(s) == ["Reject(BadCertificate:Revoked)"]


def test_expired_certificates_in_simulation():
    s = Scenario(cert_lifetime=1000, schedule=[Action(1000, "uav0", "handshake", "uav1")])
    s.latency_base, s.latency_jitter = 0, 0
    assert _outcomes(s) == ["HandshakeOk", "HandshakeOk"]
    s = Scenario(cert_lifetime=1000, schedule=[Action(1001, "uav0", "handshake", "uav1")])
    assert _outcomes(s) == ["Error(OwnCertificateExpired)"]


def test_clock_skew():
    base = default_scenario()
    base.skew = {"uav1": 900}
    assert all(o in ("HandshakeOk", "Accept") for o in _outcomes(base))
    base.skew = {"uav1": 2000}
    assert _outcomes(base)[0] == "Reject(StaleTimestamp)"


def test_gcs_runs_the_same_protocol():
    s = Scenario(n_gcs=1, schedule=[Action(0, "uav0", "handshake", "gcs0"),
                                    Action(100, "gcs0", "data", "uav0", b"waypoint")]).validate()
    assert _outcomes(s) == ["HandshakeOk", "HandshakeOk", "Accept"]


@pytest.mark.parametrize("bad", [
    dict(n_uavs=1),
    dict(schedule=[Action(5, "uav0", "handshake", "uav1"), Action(4, "uav0", "data", "uav1")]),
    dict(schedule=[Action(0, "uav9", "handshake", "uav1")]),
    dict(schedule=[Action(0, "uav0", "handshake", "uav0")]),
    dict(schedule=[Action(0, "uav0", "fly", "uav1")]),
    dict(delta_fresh=0),
    dict(skew={"nobody": 1}),
])
def test_invalid_scenarios(bad):
    with pytest.raises(InvalidScenario):
        Scenario(**bad).validate()


def test_scenario_file_roundtrip(tmp_path):
    s = default_scenario(seed=3)
    path = tmp_path / "s.json"
    path.write_text(json.dumps(s.to_dict()))
    loaded = Scenario.load(path)
    assert loaded == s
    path.write_text("{not json")
    with pytest.raises(InvalidScenario):
        Scenario.load(path)
    path.write_text(json.dumps({"schedule": [{"actor": "uav0"}]}))
    with pytest.raises(InvalidScenario):
        Scenario.load(path)


def test_all_pairs_sessions():
    sim = Simulator(all_pairs_scenario(4))
    sim.run()
    for t in sim.actors.values():
        assert len(t.sessions) == 3


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(base=st.integers(0, 400), jitter=st.integers(0, 400))
def test_latency_does_not_change_outcomes(base, jitter):
    s = default_scenario()
    s.latency_base, s.latency_jitter = base, jitter
    transcript, _ = run_scenario(s)
    assert transcript.outcomes() == ["HandshakeOk"] * 2 + ["Accept"] * 3
    for e in transcript:
        assert base <= e.deliver_time - e.send_time <= base + jitter


def test_honest_liveness_random_schedules():
    rng = random.Random(5)
    for trial in range(5):
        t_s = rng.randint(2000, 20000)
        times = sorted(rng.randint(100, t_s) for _ in range(6))
        sched = [Action(0, "uav0", "handshake", "uav1")]
        for i, t in enumerate(times):
            src, dst = ("uav0", "uav1") if i % 2 else ("uav1", "uav0")
            sched.append(Action(t, src, "data", dst, b"%d" % i))
        s = Scenario(seed=trial, t_s=t_s, schedule=sched).validate()
        outcomes = _outcomes(s)
        assert outcomes.count("Accept") == 6 and all("Reject" not in o for o in outcomes)


def test_flip_bits():
    rng = random.Random(0)
    raw = bytes(20)
    out = flip_bits(raw, rng, 8, 5, 10)
    assert out[:5] == raw[:5] and out[10:] == raw[10:]
    assert sum(bin(b).count("1") for b in out) == 8


# Attack drivers (small counts; the acceptance module runs the full sizes)

def test_zero_attempts():
    for fn in (attack_replay, attack_modify, attack_impersonate, attack_mitm):
        r = fn(default_scenario(), 0)
        assert r.attempts == 0 and r.rejected == 0 and not r.reasons


def test_late_replays():
    r = attack_replay(default_scenario(), 200)
    assert r.attempts == r.rejected == 200
    assert set(r.reasons) <= {"StaleTimestamp", "SessionExpired"}


def test_in_window_replays_hit_the_cache():
    r = attack_replay(default_scenario(), 100, within_window=True)
    assert r.attempts == r.rejected == 100
    assert set(r.reasons) == {"DuplicateMessage"}


def test_modify_message_bytes():
    r = attack_modify(default_scenario(), 100, region="m")
    assert r.rejected == 100 and set(r.reasons) == {"BadSignature"}


def test_modify_timestamp_field():
    r = attack_modify(default_scenario(), 100, region="t3")
    assert r.rejected == 100
    assert set(r.reasons) <= {"BadSignature", "StaleTimestamp"}


def test_modify_all_frames():
    r = attack_modify(default_scenario(), 150, frames="all")
    assert r.rejected == 150
    assert r.reasons.most_common(1)[0][0] == "BadSignature"


def test_impersonation_variants():
    s = default_scenario()
    r = attack_impersonate(s, 90)
    assert r.rejected == 90
    assert r.variants == {"self-signed-cert": 30, "forged-data": 30, "stolen-cert": 30}
    assert r.reasons == {"BadCertificate": 30, "BadSignature": 60}


def test_mitm_variants():
    r = attack_mitm(default_scenario(), 70)
    assert r.rejected == 70
    assert r.reasons == {"BadCertificate": 20, "BadSignature": 40, "Reflected": 10}
