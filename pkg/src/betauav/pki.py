"""Trusted authority: public parameters, registration, certificates and the CRL."""

import enum
import struct
from dataclasses import dataclass, field

from . import crypto
from .crypto import SECP160R1, decode_point, decode_signature, encode_point, encode_signature
from .ledger import LedgerUnavailable


class PkiError(Exception):
    pass


class ExpiryInPast(PkiError):
    pass


class UnknownTerminal(PkiError):
    pass


class Role(enum.Enum):
    UAV = "UAV"
    GCS = "GCS"
    TA = "TA"


class CertStatus(enum.Enum):
    VALID = "Valid"
    BAD_SIGNATURE = "BadSignature"
    EXPIRED = "Expired"
    REVOKED = "Revoked"


@dataclass(frozen=True)
class PublicParams:
    curve: crypto.CurveParams
    scid: bytes
    hash_id: str
    pk_ta: crypto.Point


@dataclass(frozen=True)
class Certificate:
    pk: crypto.Point
    t_r: int
    sigma_ta: crypto.Signature

    def signed_bytes(self, curve=SECP160R1):
        return cert_body(self.pk, self.t_r, curve)

    def to_bytes(self, curve=SECP160R1):
        return (encode_point(self.pk, curve) + struct.pack(">Q", self.t_r)
                + encode_signature(self.sigma_ta, curve))

    @classmethod
    def from_bytes(cls, data, curve=SECP160R1):
        n = curve.point_len
        if len(data) != certificate_len(curve):
            raise ValueError("certificate must be %d bytes" % certificate_len(curve))
        return cls(decode_point(data[:n], curve),
                   struct.unpack(">Q", data[n:n + 8])[0],
                   decode_signature(data[n + 8:], curve))


def certificate_len(curve=SECP160R1):
    return curve.point_len + 8 + curve.signature_len


def cert_body(pk, t_r, curve=SECP160R1):
    return encode_point(pk, curve) + struct.pack(">Q", t_r)


@dataclass(frozen=True)
class CRL:
    revoked: tuple = ()
    version: int = 0

    def __contains__(self, pk):
        return pk in self.revoked

    def with_revoked(self, pk):
        revoked = self.revoked if pk in self.revoked else self.revoked + (pk,)
        return CRL(revoked, self.version + 1)

    def export(self, curve=SECP160R1):
        lines = ["crl-v%d" % self.version]
        lines += [encode_point(pk, curve).hex() for pk in self.revoked]
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text, curve=SECP160R1):
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("crl-v"):
            raise ValueError("missing crl-v<version> header")
        version = int(lines[0][len("crl-v"):])
        pts = tuple(decode_point(bytes.fromhex(ln), curve) for ln in lines[1:])
        if len(set(pts)) != len(pts):
            raise ValueError("duplicate entries in CRL")
        return cls(pts, version)


@dataclass
class TerminalIdentity:
    """What the TA loads onto a terminal: keys, certificate, PPs and the CRL."""
    role: Role
    keypair: crypto.KeyPair
    cert: Certificate
    pps: PublicParams
    crl: CRL = field(default_factory=CRL)

    @property
    def pk(self):
        return self.keypair.pk


@dataclass
class TrustedAuthority:
    curve: crypto.CurveParams
    keypair: crypto.KeyPair
    ledger: object
    pps: PublicParams
    now: int = 0
    crl: CRL = field(default_factory=CRL)
    registry: dict = field(default_factory=dict)   # pk -> Role
    terminals: list = field(default_factory=list)

    def issue_certificate(self, pk, t_r):
        sigma = crypto.sign(self.keypair.sk, cert_body(pk, t_r, self.curve), self.curve)
        return Certificate(pk, t_r, sigma)


def ta_setup(curve, rng, ledger, now=0):
    """Generate the TA key, deploy the contract, and return ``(ta, pps)``."""
    if ledger is None or not getattr(ledger, "available", False):
        raise LedgerUnavailable("no ledger to deploy the contract on")
    keypair = crypto.keygen(rng, curve)
    scid, _ = ledger.deploy_contract(keypair.pk)
    pps = PublicParams(curve, scid, crypto.HASH_ID, keypair.pk)
    return TrustedAuthority(curve, keypair, ledger, pps, now=now), pps


def register(ta, role, t_r, rng):
    if t_r < ta.now:
        raise ExpiryInPast("expiry %d precedes TA clock %d" % (t_r, ta.now))
    role = Role(role)
    keypair = crypto.keygen(rng, ta.curve)
    cert = ta.issue_certificate(keypair.pk, t_r)
    ident = TerminalIdentity(role, keypair, cert, ta.pps, ta.crl)
    ta.registry[keypair.pk] = role
    ta.terminals.append(ident)
    return ident


def verify_certificate(pps, cert, now, crl):
    """Return the CertStatus of ``cert``; the first failing check wins."""
    curve = pps.curve
    if not crypto.verify(pps.pk_ta, cert.signed_bytes(curve), cert.sigma_ta, curve):
        return CertStatus.BAD_SIGNATURE
    if now > cert.t_r:
        return CertStatus.EXPIRED
    if cert.pk in crl:
        return CertStatus.REVOKED
    return CertStatus.VALID


def revoke(ta, pk):
    if pk not in ta.registry:
        raise UnknownTerminal("public key was never registered")
    ta.crl = ta.crl.with_revoked(pk)
    # synchronous push to every registered terminal
    for ident in ta.terminals:
        ident.crl = ta.crl
    return ta.crl
