"""Deterministic discrete-event simulation of a UAV ad-hoc network.

A single virtual clock drives every terminal. Frames travel in envelopes
through an optional adversary hook that may drop, rewrite or inject them
(Dolev-Yao on the wire, but without secret keys). The four attack drivers at
the bottom of this module replay, modify, impersonate and splice frames
against live runs and tally every outcome.
"""

import heapq
import json
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional

from . import crypto
from .crypto import SECP160R1
from .ledger import Ledger
from .pki import Certificate, Role, cert_body, register, revoke, ta_setup
from .protocol import (DEFAULT_SESSION_MS, TAG_DATA, DataMessage, HandshakeMessage,
                       MalformedMessage, ProtocolConfig, ProtocolError, Reason,
                       Terminal, decode_message)

HANDSHAKE_OK = "HandshakeOk"
ACCEPT = "Accept"
REJECT = "Reject"
ERROR = "Error"

_ERROR_REASONS = {Reason.MALFORMED, Reason.UNKNOWN_CONTRACT}


class InvalidScenario(ValueError):
    pass


@dataclass(frozen=True)
class Action:
    time: int
    actor: str
    action: str                 # handshake | data | revoke
    peer: Optional[str] = None
    payload: bytes = b""


@dataclass
class Scenario:
    seed: int = 0
    n_uavs: int = 2
    n_gcs: int = 0
    t_s: int = DEFAULT_SESSION_MS
    delta_fresh: int = 1000
    latency_base: int = 5
    latency_jitter: int = 3
    schedule: list = field(default_factory=list)
    skew: dict = field(default_factory=dict)
    cert_lifetime: int = 86_400_000
    replay_cache_capacity: int = 4096

    def actor_names(self):
        return (["uav%d" % i for i in range(self.n_uavs)]
                + ["gcs%d" % i for i in range(self.n_gcs)])

    def validate(self):
        names = set(self.actor_names())
        if self.n_uavs < 2:
            raise InvalidScenario("need at least two UAVs")
        if self.n_gcs < 0:
            raise InvalidScenario("n_gcs must be non-negative")
        if self.t_s < 0 or self.delta_fresh <= 0:
            raise InvalidScenario("t_s must be >= 0 and delta_fresh > 0")
        if self.latency_base < 0 or self.latency_jitter < 0:
            raise InvalidScenario("latency parameters must be non-negative")
        if self.cert_lifetime < 0:
            raise InvalidScenario("cert_lifetime must be non-negative")
        last = None
        for a in self.schedule:
            if last is not None and a.time < last:
                raise InvalidScenario("schedule times must be non-decreasing")
            last = a.time
            if a.time < 0:
                raise InvalidScenario("schedule times must be non-negative")
            if a.actor not in names:
                raise InvalidScenario("unknown actor %r" % a.actor)
            if a.action in ("handshake", "data"):
                if a.peer not in names or a.peer == a.actor:
                    raise InvalidScenario("action %r needs a distinct known peer" % a.action)
            elif a.action != "revoke":
                raise InvalidScenario("unknown action %r" % a.action)
        for name, off in self.skew.items():
            if name not in names:
                raise InvalidScenario("skew for unknown actor %r" % name)
            if not isinstance(off, int):
                raise InvalidScenario("skew values must be integers")
        return self

    @classmethod
    def from_dict(cls, d):
        try:
            latency = d.get("latency", {})
            schedule = []
            for e in d.get("schedule", []):
                payload = e.get("payload", "")
                if "payload_hex" in e:
                    payload = bytes.fromhex(e["payload_hex"])
                elif isinstance(payload, str):
                    payload = payload.encode("utf-8")
                schedule.append(Action(int(e["time"]), e["actor"], e["action"],
                                       e.get("peer"), payload))
            s = cls(seed=int(d.get("seed", 0)),
                    n_uavs=int(d.get("n_uavs", 2)),
                    n_gcs=int(d.get("n_gcs", 0)),
                    t_s=int(d.get("t_s", DEFAULT_SESSION_MS)),
                    delta_fresh=int(d.get("delta_fresh", 1000)),
                    latency_base=int(latency.get("base_ms", 5)),
                    latency_jitter=int(latency.get("jitter_ms", 3)),
                    schedule=schedule,
                    skew={k: int(v) for k, v in d.get("skew", {}).items()},
                    cert_lifetime=int(d.get("cert_lifetime", 86_400_000)),
                    replay_cache_capacity=int(d.get("replay_cache_capacity", 4096)))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise InvalidScenario("bad scenario document: %s" % exc) from exc
        return s.validate()

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidScenario("scenario is not valid JSON: %s" % exc) from exc
        if not isinstance(doc, dict):
            raise InvalidScenario("scenario must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self):
        return {
            "seed": self.seed, "n_uavs": self.n_uavs, "n_gcs": self.n_gcs,
            "t_s": self.t_s, "delta_fresh": self.delta_fresh,
            "latency": {"base_ms": self.latency_base, "jitter_ms": self.latency_jitter},
            "skew": dict(self.skew), "cert_lifetime": self.cert_lifetime,
            "replay_cache_capacity": self.replay_cache_capacity,
            "schedule": [{"time": a.time, "actor": a.actor, "action": a.action,
                          "peer": a.peer, "payload_hex": a.payload.hex()}
                         for a in self.schedule],
        }


def default_scenario(seed=0, t_s=DEFAULT_SESSION_MS, delta_fresh=1000):
    """Two UAVs: one handshake, then three data frames inside the session."""
    return Scenario(seed=seed, t_s=t_s, delta_fresh=delta_fresh, schedule=[
        Action(0, "uav0", "handshake", "uav1"),
        Action(1000, "uav0", "data", "uav1", b"telemetry 1"),
        Action(2000, "uav1", "data", "uav0", b"ack 1"),
        Action(3000, "uav0", "data", "uav1", b"telemetry 2"),
    ]).validate()


def all_pairs_scenario(n, seed=0, gap=100, t_s=DEFAULT_SESSION_MS):
    """Every pair of ``n`` drones runs one handshake, spaced ``gap`` ms apart."""
    schedule = []
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            schedule.append(Action(k * gap, "uav%d" % i, "handshake", "uav%d" % j))
            k += 1
    return Scenario(seed=seed, n_uavs=n, t_s=t_s, schedule=schedule).validate()


@dataclass(frozen=True)
class Outcome:
    status: str
    reason: Optional[str] = None
    detail: Optional[str] = None

    @property
    def ok(self):
        return self.status in (HANDSHAKE_OK, ACCEPT)

    @property
    def label(self):
        if self.reason is None:
            return self.status
        if self.detail:
            return "%s(%s:%s)" % (self.status, self.reason, self.detail)
        return "%s(%s)" % (self.status, self.reason)


@dataclass(frozen=True)
class Envelope:
    send_time: int
    src: str
    dst: str
    kind: str                   # request | reply | data
    wire: bytes
    injected: bool = False
    tag: str = ""               # adversary bookkeeping


@dataclass(frozen=True)
class TranscriptEntry:
    send_time: int
    deliver_time: int
    src: str
    dst: str
    kind: str
    wire: bytes
    outcome: Outcome
    injected: bool = False
    tag: str = ""

    def to_line(self):
        line = ("send=%d deliver=%d from=%s to=%s kind=%s outcome=%s wire=%s"
                % (self.send_time, self.deliver_time, self.src, self.dst, self.kind,
                   self.outcome.label, self.wire.hex()))
        if self.injected:
            line += " injected=1"
            if self.tag:
                line += " tag=%s" % self.tag
        return line


class Transcript(list):
    def to_text(self):
        return "".join(e.to_line() + "\n" for e in self)

    def outcomes(self):
        return [e.outcome.label for e in self]


@dataclass
class Metrics:
    per_actor: dict = field(default_factory=dict)       # name -> Counter
    events: list = field(default_factory=list)          # (time, actor, what, Counter)

    def totals(self):
        total = Counter()
        for c in self.per_actor.values():
            total.update(c)
        return total


OP_NAMES = ("scalar_mul", "point_add", "hash", "sign", "verify")


class Simulator:
    """One run of a scenario; build a fresh instance per run."""

    def __init__(self, scenario, adversary=None, curve=SECP160R1):
        scenario.validate()
        self.scenario = scenario
        self.curve = curve
        self.adversary = adversary
        rng = random.Random(scenario.seed)
        self.ledger = Ledger(curve)
        self.ta, self.pps = ta_setup(curve, rng, self.ledger)
        self.cfg = ProtocolConfig(scenario.delta_fresh, scenario.replay_cache_capacity)
        self.actors = {}
        for name in scenario.actor_names():
            role = Role.UAV if name.startswith("uav") else Role.GCS
            ident = register(self.ta, role, scenario.cert_lifetime, rng)
            self.actors[name] = Terminal(ident, self.ledger, self.cfg, name)
        self.by_pk = {t.pk: name for name, t in self.actors.items()}
        self._latency_rng = random.Random(rng.getrandbits(64))
        self._queue = []
        self._seq = 0
        self.now = 0
        self.transcript = Transcript()
        self.metrics = Metrics({name: Counter() for name in self.actors})
        for a in scenario.schedule:
            self._push(a.time, "action", a)

    def _push(self, at, what, item):
        heapq.heappush(self._queue, (at, self._seq, what, item))
        self._seq += 1

    def local_time(self, name, t=None):
        return (self.now if t is None else t) + self.scenario.skew.get(name, 0)

    def latency(self):
        jitter = self._latency_rng.randint(0, self.scenario.latency_jitter)
        return self.scenario.latency_base + jitter

    def send(self, env):
        """Route a frame through the adversary, then onto the wire."""
        envs = [env] if self.adversary is None else self.adversary.on_send(self, env)
        for e in envs:
            self._push(e.send_time + self.latency(), "deliver", e)

    def inject(self, env, at):
        self._push(at, "deliver", env)

    def _charge(self, name, what, fn):
        ops = Counter()
        with crypto.counting(ops):
            result = fn()
        self.metrics.per_actor[name].update(ops)
        self.metrics.events.append((self.now, name, what, ops))
        return result

    def _act(self, a):
        actor = self.actors[a.actor]
        now = self.local_time(a.actor)
        if a.action == "revoke":
            revoke(self.ta, actor.pk)
            return
        if a.action == "handshake":
            try:
                msg = self._charge(a.actor, "init_request",
                                   lambda: actor.init_request(self.scenario.t_s, now))
            except ProtocolError as exc:
                self._record_local_failure(a, "request", exc)
                return
            self.send(Envelope(self.now, a.actor, a.peer, "request", msg.to_bytes(self.curve)))
        else:
            peer_pk = self.actors[a.peer].pk
            session = actor.sessions.get(peer_pk)
            msg = self._charge(a.actor, "send_data",
                               lambda: actor.send_data(session, a.payload, now))
            self.send(Envelope(self.now, a.actor, a.peer, "data", msg.to_bytes(self.curve)))

    def _record_local_failure(self, a, kind, exc):
        self.transcript.append(TranscriptEntry(
            self.now, self.now, a.actor, a.peer, kind, b"",
            Outcome(ERROR, exc.reason.value, exc.detail)))

    def _deliver(self, env):
        receiver = self.actors[env.dst]
        now = self.local_time(env.dst)
        reply = None
        try:
            msg = decode_message(env.wire, self.curve)
            if env.kind == "data":
                if not isinstance(msg, DataMessage):
                    raise MalformedMessage("expected data frame")
                verdict = self._charge(env.dst, "on_data", lambda: receiver.on_data(msg, now))
                outcome = (Outcome(ACCEPT) if verdict.accepted
                           else Outcome(REJECT, verdict.reason.value))
            else:
                if not isinstance(msg, HandshakeMessage):
                    raise MalformedMessage("expected handshake frame")
                if env.kind == "request":
                    reply, _ = self._charge(env.dst, "on_request",
                                            lambda: receiver.on_request(msg, now))
                else:
                    self._charge(env.dst, "on_reply", lambda: receiver.on_reply(msg, now))
                outcome = Outcome(HANDSHAKE_OK)
        except ProtocolError as exc:
            status = ERROR if exc.reason in _ERROR_REASONS else REJECT
            outcome = Outcome(status, exc.reason.value, exc.detail)
        self.transcript.append(TranscriptEntry(env.send_time, self.now, env.src, env.dst,
                                               env.kind, env.wire, outcome,
                                               env.injected, env.tag))
        if reply is not None:
            self.send(Envelope(self.now, env.dst, env.src, "reply",
                               reply.to_bytes(self.curve)))

    def step(self):
        at, _, what, item = heapq.heappop(self._queue)
        self.now = at
        if what == "action":
            self._act(item)
        else:
            self._deliver(item)

    def run(self):
        while self._queue:
            self.step()
        return self.transcript, self.metrics


def run_scenario(scenario, adversary=None):
    """Simulate ``scenario``; returns ``(Transcript, Metrics)``."""
    return Simulator(scenario, adversary).run()


# Attacks
# ##########################################################################

@dataclass
class AttackReport:
    kind: str
    attempts: int = 0
    rejected: int = 0
    reasons: Counter = field(default_factory=Counter)
    variants: Counter = field(default_factory=Counter)

    @property
    def rejection_rate(self):
        return self.rejected / self.attempts if self.attempts else 1.0

    @property
    def accepted(self):
        return self.attempts - self.rejected


def _tally(kind, transcript):
    report = AttackReport(kind)
    for e in transcript:
        if not e.injected:
            continue
        report.attempts += 1
        report.variants[e.tag] += 1
        if not e.outcome.ok:
            report.rejected += 1
            report.reasons[e.outcome.reason] += 1
    return report


def _attack_rng(base, kind):
    return random.Random("%s:%d" % (kind, base.seed))


class _Recorder:
    """Pass-through adversary that keeps every frame in send order."""

    def __init__(self):
        self.frames = []

    def on_send(self, sim, env):
        self.frames.append(env)
        return [env]


def _honest_frames(base, kinds):
    rec = _Recorder()
    run_scenario(base, rec)
    return [e for e in rec.frames if e.kind in kinds]


class _FrameHook:
    """Adversary that reacts to the i-th frame of selected kinds."""

    def __init__(self, kinds, per_frame):
        self.kinds = kinds
        self.per_frame = per_frame      # frame index -> callable(sim, env) -> [Envelope]
        self.index = 0

    def on_send(self, sim, env):
        if env.injected or env.kind not in self.kinds:
            return [env]
        i = self.index
        self.index += 1
        fn = self.per_frame.get(i)
        return [env] if fn is None else fn(sim, env)


def attack_replay(base, n_attempts, within_window=False):
    """Re-inject recorded frames after the freshness window, or inside it."""
    report_kind = "Replay"
    if n_attempts == 0:
        return AttackReport(report_kind)
    kinds = ("request", "reply", "data")
    frames = _honest_frames(base, kinds)
    if not frames:
        raise InvalidScenario("base scenario produced no frames to replay")
    rng = _attack_rng(base, report_kind)
    plan = {}
    for _ in range(n_attempts):
        i = rng.randrange(len(frames))
        if within_window:
            offset = None
        else:
            offset = rng.randint(base.delta_fresh + 1, max(10 * base.t_s, base.delta_fresh + 1))
        plan.setdefault(i, []).append(offset)

    def make(offsets):
        def fn(sim, env):
            # the original still goes through so the honest run proceeds
            for off in offsets:
                copy = replace(env, injected=True,
                               tag="late" if off is not None else "in-window")
                if off is None:
                    # delivered after the original, still inside its window
                    at = env.send_time + sim.scenario.latency_base + sim.scenario.latency_jitter + 1
                    at = min(at, env.send_time + sim.scenario.delta_fresh)
                else:
                    at = env.send_time + off
                sim.inject(copy, at)
            return [env]
        return fn

    hook = _FrameHook(kinds, {i: make(offs) for i, offs in plan.items()})
    transcript, _ = run_scenario(base, hook)
    return _tally(report_kind, transcript)


def flip_bits(wire, rng, n_bits, lo, hi):
    """Flip ``n_bits`` distinct bits inside byte range [lo, hi)."""
    buf = bytearray(wire)
    for pos in rng.sample(range(lo * 8, hi * 8), n_bits):
        buf[pos // 8] ^= 0x80 >> (pos % 8)
    return bytes(buf)


def _modify_region(wire, region, curve):
    if wire[0] == TAG_DATA:
        mlen = int.from_bytes(wire[1:5], "big")
        m_lo, t3_lo = 5, 5 + mlen
        if region == "m":
            return m_lo, t3_lo
        if region == "t3":
            return t3_lo, t3_lo + 8
        return 5, len(wire)
    if region != "payload":
        raise ValueError("region %r only applies to data frames" % region)
    return 1, len(wire)


def attack_modify(base, n_attempts, frames="data", region="payload"):
    """Flip 1-8 bits in in-flight frames; each copy is delivered before the original."""
    report_kind = "Modify"
    if n_attempts == 0:
        return AttackReport(report_kind)
    kinds = ("data",) if frames == "data" else ("request", "reply", "data")
    honest = _honest_frames(base, kinds)
    if region == "m":
        candidates = [i for i, e in enumerate(honest) if len(e.wire) > 93]
    else:
        candidates = list(range(len(honest)))
    if not candidates:
        raise InvalidScenario("base scenario produced no frames to modify")
    rng = _attack_rng(base, report_kind)
    plan = {}
    for _ in range(n_attempts):
        plan.setdefault(rng.choice(candidates), []).append(rng.randint(1, 8))

    def make(nbits_list):
        def fn(sim, env):
            lo, hi = _modify_region(env.wire, region, sim.curve)
            out = []
            for nbits in nbits_list:
                wire = flip_bits(env.wire, rng, min(nbits, 8 * (hi - lo)), lo, hi)
                out.append(replace(env, wire=wire, injected=True, tag=region))
            return out + [env]
        return fn

    hook = _FrameHook(kinds, {i: make(v) for i, v in plan.items()})
    transcript, _ = run_scenario(base, hook)
    return _tally(report_kind, transcript)


def _first_session_window(base):
    """(initiator, responder, handshake time) of the base run's first handshake."""
    for a in base.schedule:
        if a.action == "handshake":
            return a.actor, a.peer, a.time
    raise InvalidScenario("base scenario has no handshake")


def attack_impersonate(base, n_attempts):
    """An unregistered key tries to pass as a terminal, three ways in rotation."""
    report_kind = "Impersonate"
    if n_attempts == 0:
        return AttackReport(report_kind)
    rng = _attack_rng(base, report_kind)
    sim = Simulator(base)
    curve = sim.curve
    victim_name, target_name, t0 = _first_session_window(base)
    victim, target = sim.actors[victim_name], sim.actors[target_name]
    adv = crypto.keygen(rng, curve)
    lo = t0 + 100
    hi = max(lo, t0 + base.t_s // 2)
    variants = ("self-signed-cert", "forged-data", "stolen-cert")
    for i in range(n_attempts):
        variant = variants[i % 3]
        at = rng.randint(lo, hi)
        t = at + base.skew.get(target_name, 0)
        if variant == "self-signed-cert":
            t_r = t + base.cert_lifetime
            cert = Certificate(adv.pk, t_r, crypto.sign(adv.sk, cert_body(adv.pk, t_r, curve), curve))
            msg = _signed_handshake(adv.sk, cert, t, base.t_s, curve)
            env = Envelope(at, "adversary", target_name, "request", msg.to_bytes(curve))
        elif variant == "forged-data":
            m = b"forged %d" % i
            sigma = crypto.sign(adv.sk, DataMessage.signed_bytes_for(m, t, victim.pk, curve), curve)
            msg = DataMessage(m, t, victim.pk, sigma)
            env = Envelope(at, "adversary", target_name, "data", msg.to_bytes(curve))
        else:
            msg = _signed_handshake(adv.sk, victim.identity.cert, t, base.t_s, curve)
            env = Envelope(at, "adversary", target_name, "request", msg.to_bytes(curve))
        sim.inject(replace(env, injected=True, tag=variant), at)
    transcript, _ = sim.run()
    return _tally(report_kind, transcript)


def _signed_handshake(sk, cert, t, t_s, curve):
    sigma = crypto.sign(sk, HandshakeMessage.signed_bytes_for(cert, t, t_s, curve), curve)
    return HandshakeMessage(cert, t, t_s, sigma)


MITM_VARIANTS = ("cert-swap", "cert-swap-resigned", "splice-sigma", "splice-cert",
                 "reflect", "restamp", "extend-ts")


def attack_mitm(base, n_attempts):
    """Intercept handshake tuples and forward rewritten or spliced versions."""
    report_kind = "Mitm"
    if n_attempts == 0:
        return AttackReport(report_kind)
    kinds = ("request", "reply")
    honest = _honest_frames(base, kinds)
    if not honest:
        raise InvalidScenario("base scenario produced no handshake frames")
    rng = _attack_rng(base, report_kind)
    curve = SECP160R1
    msgs = [decode_message(e.wire, curve) for e in honest]
    plan = {}
    for i in range(n_attempts):
        plan.setdefault(rng.randrange(len(honest)), []).append(MITM_VARIANTS[i % len(MITM_VARIANTS)])
    adv = crypto.keygen(rng, curve)

    def counterpart(i):
        # the frame travelling the other way in the same handshake
        e = honest[i]
        for j, o in enumerate(honest):
            if j != i and o.src == e.dst and o.dst == e.src:
                return msgs[j]
        return None

    def build(variant, msg, other, env):
        t_r = msg.t + base.cert_lifetime
        adv_cert = Certificate(adv.pk, t_r, crypto.sign(adv.sk, cert_body(adv.pk, t_r, curve), curve))
        kind, dst = env.kind, env.dst
        if variant == "cert-swap":
            forged = replace(msg, cert=adv_cert)
        elif variant == "cert-swap-resigned":
            forged = _signed_handshake(adv.sk, adv_cert, msg.t, msg.t_s, curve)
        elif variant == "splice-sigma":
            forged = replace(msg, sigma=other.sigma if other else crypto.Signature(1, 1))
        elif variant == "splice-cert":
            forged = replace(msg, cert=other.cert if other else adv_cert)
        elif variant == "reflect":
            forged = msg
            kind = "reply" if env.kind == "request" else "request"
            dst = env.src
        elif variant == "restamp":
            forged = replace(msg, t=msg.t + 1 + rng.randrange(base.delta_fresh // 2))
        else:
            forged = replace(msg, t_s=msg.t_s + 1 + rng.randrange(10 * max(base.t_s, 1)))
        return replace(env, wire=forged.to_bytes(curve), kind=kind, dst=dst,
                       injected=True, tag=variant)

    def make(i, variants):
        def fn(sim, env):
            msg, other = msgs[i], counterpart(i)
            return [build(v, msg, other, env) for v in variants] + [env]
        return fn

    hook = _FrameHook(kinds, {i: make(i, v) for i, v in plan.items()})
    transcript, _ = run_scenario(base, hook)
    return _tally(report_kind, transcript)


ATTACKS = {
    "replay": attack_replay,
    "modify": attack_modify,
    "impersonate": attack_impersonate,
    "mitm": attack_mitm,
}
