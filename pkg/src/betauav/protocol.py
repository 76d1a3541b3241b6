"""Handshake and data-slot state machine run by every UAV and GCS.

First slot: each side presents ``<Cert, T, T_S, sigma>``; the receiver checks
freshness, the certificate and the signature, then records the session on the
ledger. Later slots carry ``<m, T3, Pk, sigma3>`` and are accepted only while
``T3 - T1 <= T_S`` against the transaction stored on chain.
"""

import enum
import struct
from collections import OrderedDict
from dataclasses import dataclass
from typing import Optional

from . import crypto
from .crypto import SECP160R1, decode_point, decode_signature, encode_point, encode_signature
from .ledger import LedgerError, TxKind, UnknownTx
from .pki import CertStatus, Certificate, certificate_len, verify_certificate

TAG_HANDSHAKE = 0x01
TAG_DATA = 0x02

# Reference example session interval, 00:10:00.
DEFAULT_SESSION_MS = 600_000


class Reason(enum.Enum):
    STALE_TIMESTAMP = "StaleTimestamp"
    BAD_CERTIFICATE = "BadCertificate"
    BAD_SIGNATURE = "BadSignature"
    UNKNOWN_CONTRACT = "UnknownContract"
    NO_PENDING_HANDSHAKE = "NoPendingHandshake"
    OWN_CERTIFICATE_EXPIRED = "OwnCertificateExpired"
    REFLECTED = "Reflected"
    NO_SESSION = "NoSession"
    UNKNOWN_TX = "UnknownTx"
    SESSION_EXPIRED = "SessionExpired"
    DUPLICATE_MESSAGE = "DuplicateMessage"
    MALFORMED = "Malformed"


class ProtocolError(Exception):
    def __init__(self, reason, detail=None):
        self.reason = reason
        self.detail = detail
        msg = reason.value if detail is None else "%s(%s)" % (reason.value, detail)
        super().__init__(msg)

    @property
    def label(self):
        return str(self)


class MalformedMessage(ProtocolError):
    def __init__(self, detail):
        super().__init__(Reason.MALFORMED, detail)


@dataclass(frozen=True)
class ProtocolConfig:
    delta_fresh: int = 1000
    replay_cache_capacity: int = 4096

    def __post_init__(self):
        if self.delta_fresh <= 0:
            raise ValueError("delta_fresh must be positive")
        if self.replay_cache_capacity < 0:
            raise ValueError("replay_cache_capacity must be non-negative")


def _u64(v):
    return struct.pack(">Q", v)


@dataclass(frozen=True)
class HandshakeMessage:
    cert: Certificate
    t: int
    t_s: int
    sigma: crypto.Signature

    @staticmethod
    def signed_bytes_for(cert, t, t_s, curve=SECP160R1):
        return cert.to_bytes(curve) + _u64(t) + _u64(t_s)

    def signed_bytes(self, curve=SECP160R1):
        return self.signed_bytes_for(self.cert, self.t, self.t_s, curve)

    def to_bytes(self, curve=SECP160R1):
        return (bytes([TAG_HANDSHAKE]) + self.signed_bytes(curve)
                + encode_signature(self.sigma, curve))


@dataclass(frozen=True)
class DataMessage:
    m: bytes
    t3: int
    pk: crypto.Point
    sigma3: crypto.Signature

    @staticmethod
    def signed_bytes_for(m, t3, pk, curve=SECP160R1):
        return bytes(m) + _u64(t3) + encode_point(pk, curve)

    def signed_bytes(self, curve=SECP160R1):
        return self.signed_bytes_for(self.m, self.t3, self.pk, curve)

    def to_bytes(self, curve=SECP160R1):
        return (bytes([TAG_DATA]) + struct.pack(">I", len(self.m)) + self.m
                + _u64(self.t3) + encode_point(self.pk, curve)
                + encode_signature(self.sigma3, curve))


def handshake_len(curve=SECP160R1):
    return 1 + certificate_len(curve) + 8 + 8 + curve.signature_len


def data_len(payload_len, curve=SECP160R1):
    return 1 + 4 + payload_len + 8 + curve.point_len + curve.signature_len


def decode_message(data, curve=SECP160R1):
    """Parse a wire frame into a HandshakeMessage or DataMessage."""
    if not data:
        raise MalformedMessage("empty frame")
    tag = data[0]
    if tag == TAG_HANDSHAKE:
        if len(data) != handshake_len(curve):
            raise MalformedMessage("handshake frame length %d" % len(data))
        n = certificate_len(curve)
        cert = Certificate.from_bytes(data[1:1 + n], curve)
        t, t_s = struct.unpack(">QQ", data[1 + n:17 + n])
        return HandshakeMessage(cert, t, t_s, decode_signature(data[17 + n:], curve))
    if tag == TAG_DATA:
        if len(data) < data_len(0, curve):
            raise MalformedMessage("data frame too short")
        (mlen,) = struct.unpack(">I", data[1:5])
        if len(data) != data_len(mlen, curve):
            raise MalformedMessage("data frame length disagrees with m_len")
        m = data[5:5 + mlen]
        rest = data[5 + mlen:]
        (t3,) = struct.unpack(">Q", rest[:8])
        pk = decode_point(rest[8:8 + curve.point_len], curve)
        return DataMessage(m, t3, pk, decode_signature(rest[8 + curve.point_len:], curve))
    raise MalformedMessage("unknown tag 0x%02x" % tag)


@dataclass(frozen=True)
class SessionRecord:
    peer_pk: crypto.Point
    t_s: int
    txid: bytes
    t_start: int


@dataclass(frozen=True)
class DataVerdict:
    accepted: bool
    m: Optional[bytes] = None
    reason: Optional[Reason] = None

    @property
    def label(self):
        return "Accept" if self.accepted else "Reject(%s)" % self.reason.value


class ReplayCache:
    """Bounded FIFO set of message digests."""

    def __init__(self, capacity):
        self.capacity = capacity
        self._seen = OrderedDict()

    def __contains__(self, digest):
        return digest in self._seen

    def __len__(self):
        return len(self._seen)

    def add(self, digest):
        if self.capacity == 0:
            return
        self._seen[digest] = None
        self._seen.move_to_end(digest)
        while len(self._seen) > self.capacity:
            self._seen.popitem(last=False)


class Terminal:
    """One protocol participant. UAVs and GCSs share this state machine."""

    def __init__(self, identity, ledger, cfg=None, name=None):
        self.identity = identity
        self.ledger = ledger
        self.cfg = cfg or ProtocolConfig()
        self.name = name or identity.role.value
        self.sessions = {}                  # peer pk -> SessionRecord
        self.pending = {}                   # t_s -> outstanding request count
        self.replay_cache = ReplayCache(self.cfg.replay_cache_capacity)

    @property
    def curve(self):
        return self.identity.pps.curve

    @property
    def pk(self):
        return self.identity.pk

    def _sign(self, data):
        return crypto.sign(self.identity.keypair.sk, data, self.curve)

    def _own_handshake(self, t_s, now):
        cert = self.identity.cert
        if now > cert.t_r:
            raise ProtocolError(Reason.OWN_CERTIFICATE_EXPIRED)
        sigma = self._sign(HandshakeMessage.signed_bytes_for(cert, now, t_s, self.curve))
        return HandshakeMessage(cert, now, t_s, sigma)

    def _fresh(self, t, now):
        return abs(now - t) <= self.cfg.delta_fresh

    def _check_handshake(self, msg, now):
        if not self._fresh(msg.t, now):
            raise ProtocolError(Reason.STALE_TIMESTAMP)
        status = verify_certificate(self.identity.pps, msg.cert, now, self.identity.crl)
        if status is not CertStatus.VALID:
            raise ProtocolError(Reason.BAD_CERTIFICATE, status.value)
        if not crypto.verify(msg.cert.pk, msg.signed_bytes(self.curve), msg.sigma, self.curve):
            raise ProtocolError(Reason.BAD_SIGNATURE)
        if msg.cert.pk == self.pk:
            raise ProtocolError(Reason.REFLECTED)
        digest = crypto.h1(msg.to_bytes(self.curve))
        if digest in self.replay_cache:
            raise ProtocolError(Reason.DUPLICATE_MESSAGE)
        return digest

    def _record(self, msg):
        try:
            txid = self.ledger.issue_session(self.identity.pps.scid, self.pk,
                                             msg.cert.pk, self.pk, msg.t)
        except LedgerError as exc:
            raise ProtocolError(Reason.UNKNOWN_CONTRACT, type(exc).__name__) from exc
        record = SessionRecord(msg.cert.pk, msg.t_s, txid, msg.t)
        self.sessions[msg.cert.pk] = record
        return record

    def init_request(self, t_s, now):
        msg = self._own_handshake(t_s, now)
        self.pending[t_s] = self.pending.get(t_s, 0) + 1
        return msg

    def on_request(self, msg, now):
        """Verify a first-slot request; returns ``(reply, SessionRecord)``."""
        digest = self._check_handshake(msg, now)
        reply = self._own_handshake(msg.t_s, now)
        record = self._record(msg)
        self.replay_cache.add(digest)
        return reply, record

    def on_reply(self, msg, now):
        digest = self._check_handshake(msg, now)
        if not self.pending.get(msg.t_s):
            raise ProtocolError(Reason.NO_PENDING_HANDSHAKE)
        record = self._record(msg)
        self.pending[msg.t_s] -= 1
        if not self.pending[msg.t_s]:
            del self.pending[msg.t_s]
        self.replay_cache.add(digest)
        return record

    def send_data(self, session, m, now):
        m = bytes(m)
        sigma3 = self._sign(DataMessage.signed_bytes_for(m, now, self.pk, self.curve))
        return DataMessage(m, now, self.pk, sigma3)

    def on_data(self, msg, now):
        def reject(reason):
            return DataVerdict(False, reason=reason)

        curve = self.curve
        if not self._fresh(msg.t3, now):
            return reject(Reason.STALE_TIMESTAMP)
        if not crypto.verify(msg.pk, msg.signed_bytes(curve), msg.sigma3, curve):
            return reject(Reason.BAD_SIGNATURE)
        record = self.sessions.get(msg.pk)
        if record is None:
            return reject(Reason.NO_SESSION)
        try:
            tx = self.ledger.get_tx(record.txid)
        except UnknownTx:
            return reject(Reason.UNKNOWN_TX)
        if (tx.kind is not TxKind.ISSUE_SESSION or tx.pk_from != msg.pk
                or tx.t_issue != record.t_start):
            return reject(Reason.UNKNOWN_TX)
        # T1 comes from the chain, not the local cache
        if msg.t3 - tx.t_issue > record.t_s:
            return reject(Reason.SESSION_EXPIRED)
        digest = crypto.h1(msg.to_bytes(curve))
        if digest in self.replay_cache:
            return reject(Reason.DUPLICATE_MESSAGE)
        self.replay_cache.add(digest)
        return DataVerdict(True, m=msg.m)
