"""Short Weierstrass curve arithmetic, ECDSA-style signatures and the H1 hash.

Points are ``Point(x, y)`` named tuples; the point at infinity is ``None``.
Nothing here is constant time.
"""

import contextlib
import contextvars
import hashlib
import random
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple


class CurveError(ValueError):
    pass


class SingularCurve(CurveError):
    pass


class NotPrime(CurveError):
    pass


class PointNotOnCurve(CurveError):
    pass


class WrongOrder(CurveError):
    pass


class Point(NamedTuple):
    x: int
    y: int


INFINITY = None

DIGEST_SIZE = 32
HASH_ID = "sha256"


# Operation counting
# ##########################################################################
# The simulator attributes primitive invocations to the actor whose event is
# being processed; delay models are built from these counts.

_active_counter = contextvars.ContextVar("betauav_op_counter", default=None)


@contextlib.contextmanager
def counting(counter=None):
    """Count primitive calls made inside the block into ``counter``."""
    if counter is None:
        counter = Counter()
    token = _active_counter.set(counter)
    try:
        yield counter
    finally:
        _active_counter.reset(token)


def _tick(name):
    c = _active_counter.get()
    if c is not None:
        c[name] += 1


# Primality
# ##########################################################################

def is_probable_prime(n, rounds=64):
    """Miller-Rabin with ``rounds`` bases drawn from a fixed-seed generator."""
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    for sp in small:
        if n % sp == 0:
            return n == sp
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    rng = random.Random(n)
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


# Curves
# ##########################################################################

@dataclass(frozen=True)
class CurveParams:
    a: int
    b: int
    p: int
    q: int
    g: Point
    h: int = 1
    name: str = "custom"

    @property
    def coord_len(self):
        # byte width of one field element on the wire
        return (self.p.bit_length() + 7) // 8

    @property
    def scalar_len(self):
        # signature components share the coordinate width
        return self.coord_len

    @property
    def point_len(self):
        return 2 * self.coord_len

    @property
    def signature_len(self):
        return 2 * self.scalar_len

    def contains(self, P):
        if P is None:
            return True
        x, y = P
        if not (0 <= x < self.p and 0 <= y < self.p):
            return False
        return (y * y - (x * x * x + self.a * x + self.b)) % self.p == 0


def validate_curve(a, b, p, q, g, h=1, name="custom"):
    """Build a CurveParams, raising a CurveError subclass on any defect."""
    if min(a, b, p, q) < 0 or p <= 3 or q <= 3:
        raise CurveError("parameters must be non-negative with p, q > 3")
    if (4 * a ** 3 + 27 * b ** 2) % p == 0:
        raise SingularCurve("discriminant 4a^3 + 27b^2 vanishes mod p")
    if not is_probable_prime(p):
        raise NotPrime("p is composite")
    if not is_probable_prime(q):
        raise NotPrime("q is composite")
    g = Point(*g)
    curve = CurveParams(a % p, b % p, p, q, g, h, name)
    if not curve.contains(g):
        raise PointNotOnCurve("generator does not satisfy the curve equation")
    if _mul_unreduced(q, g, curve) is not None:
        raise WrongOrder("q * g is not the point at infinity")
    return curve


# Group law
# ##########################################################################

def point_neg(P, curve):
    if P is None:
        return None
    return Point(P.x, (-P.y) % curve.p)


def _affine_add(P, Q, curve):
    if P is None:
        return Q
    if Q is None:
        return P
    p = curve.p
    if P.x == Q.x:
        if (P.y + Q.y) % p == 0:
            return None
        lam = (3 * P.x * P.x + curve.a) * pow(2 * P.y, -1, p) % p
    else:
        lam = (Q.y - P.y) * pow(Q.x - P.x, -1, p) % p
    x3 = (lam * lam - P.x - Q.x) % p
    return Point(x3, (lam * (P.x - x3) - P.y) % p)


def point_add(P, Q, curve):
    """Chord-and-tangent addition; ``None`` is the identity."""
    _tick("point_add")
    return _affine_add(P, Q, curve)


# Jacobian coordinates (X, Y, Z) ~ (X/Z^2, Y/Z^3); Z == 0 encodes infinity.

def _jdouble(X, Y, Z, a, p):
    if Y == 0 or Z == 0:
        return 0, 1, 0
    YY = Y * Y % p
    S = 4 * X * YY % p
    ZZ = Z * Z % p
    M = (3 * X * X + a * ZZ * ZZ) % p
    X3 = (M * M - 2 * S) % p
    Y3 = (M * (S - X3) - 8 * YY * YY) % p
    Z3 = 2 * Y * Z % p
    return X3, Y3, Z3


def _jadd_affine(X1, Y1, Z1, x2, y2, a, p):
    # mixed addition, second operand affine and finite
    if Z1 == 0:
        return x2, y2, 1
    Z1Z1 = Z1 * Z1 % p
    U2 = x2 * Z1Z1 % p
    S2 = y2 * Z1 * Z1Z1 % p
    H = (U2 - X1) % p
    R = (S2 - Y1) % p
    if H == 0:
        if R == 0:
            return _jdouble(X1, Y1, Z1, a, p)
        return 0, 1, 0
    HH = H * H % p
    HHH = H * HH % p
    V = X1 * HH % p
    X3 = (R * R - HHH - 2 * V) % p
    Y3 = (R * (V - X3) - Y1 * HHH) % p
    Z3 = Z1 * H % p
    return X3, Y3, Z3


def _mul_unreduced(k, P, curve):
    if k == 0 or P is None:
        return None
    a, p = curve.a, curve.p
    X, Y, Z = 0, 1, 0
    for bit in bin(k)[2:]:
        X, Y, Z = _jdouble(X, Y, Z, a, p)
        if bit == "1":
            X, Y, Z = _jadd_affine(X, Y, Z, P.x, P.y, a, p)
    if Z == 0:
        return None
    zinv = pow(Z, -1, p)
    zinv2 = zinv * zinv % p
    return Point(X * zinv2 % p, Y * zinv2 * zinv % p)


def scalar_mul(k, P, curve):
    """k * P by left-to-right double-and-add; k is reduced mod q first."""
    if k < 0:
        raise ValueError("scalar must be non-negative")
    _tick("scalar_mul")
    return _mul_unreduced(k % curve.q, P, curve)


# Hash
# ##########################################################################

def h1(data):
    """SHA-256, the scheme's H1."""
    _tick("hash")
    return hashlib.sha256(data).digest()


# Shipped curves
# ##########################################################################

SECP160R1 = validate_curve(
    a=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF7FFFFFFC,
    b=0x1C97BEFC54BD7A8B65ACF89F81D4D4ADC565FA45,
    p=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF7FFFFFFF,
    q=0x0100000000000000000001F4C8F927AED3CA752257,
    g=(0x4A96B5688EF573284664698968C38BB913CBFC82,
       0x23A628553168947D59DCC912042351377AC5FB32),
    name="secp160r1",
)

# y^2 = x^3 + 2x + 2 over F_17; 19 points, generated by (5, 1).
TOY17 = validate_curve(a=2, b=2, p=17, q=19, g=(5, 1), name="toy17")

CURVES = {c.name: c for c in (SECP160R1, TOY17)}


# Keys and signatures
# ##########################################################################

@dataclass(frozen=True)
class KeyPair:
    sk: int
    pk: Point


class Signature(NamedTuple):
    r: int
    s: int


def keygen(rng, curve=SECP160R1):
    """Draw sk uniformly from [1, q-1] using the supplied ``random.Random``."""
    while True:
        sk = rng.randrange(1, curve.q)
        pk = scalar_mul(sk, curve.g, curve)
        if pk is not None:
            return KeyPair(sk, pk)


def _hash_to_int(msg_hash, curve):
    e = int.from_bytes(msg_hash, "big")
    excess = 8 * len(msg_hash) - curve.q.bit_length()
    if excess > 0:
        e >>= excess
    return e


def _nonce(sk, msg_hash, curve, counter):
    width = (curve.q.bit_length() + 7) // 8
    seed = sk.to_bytes(width, "big") + msg_hash
    if counter:
        seed += counter.to_bytes(4, "big")
    return int.from_bytes(h1(seed), "big") % curve.q


def sign(sk, msg, curve=SECP160R1):
    """Deterministic ECDSA over H1(msg).

    The nonce is H1(sk || H1(msg)) mod q. A zero nonce, a zero component, or a
    component too wide for the fixed wire width re-derives it with a 4-byte
    counter suffix.
    """
    _tick("sign")
    q = curve.q
    msg_hash = h1(msg)
    e = _hash_to_int(msg_hash, curve)
    limit = 1 << (8 * curve.scalar_len)
    counter = 0
    while True:
        k = _nonce(sk, msg_hash, curve, counter)
        counter += 1
        if k == 0:
            continue
        R = scalar_mul(k, curve.g, curve)
        r = R.x % q
        if r == 0 or r >= limit:
            continue
        s = pow(k, -1, q) * (e + r * sk) % q
        if s == 0 or s >= limit:
            continue
        return Signature(r, s)


def verify(pk, msg, sig, curve=SECP160R1):
    """True iff ``sig`` is a valid signature on ``msg`` under ``pk``."""
    _tick("verify")
    q = curve.q
    r, s = sig
    if not (1 <= r < q and 1 <= s < q):
        return False
    if pk is None or not curve.contains(pk):
        return False
    e = _hash_to_int(h1(msg), curve)
    w = pow(s, -1, q)
    R = point_add(scalar_mul(e * w % q, curve.g, curve),
                  scalar_mul(r * w % q, pk, curve), curve)
    return R is not None and R.x % q == r


# Wire encoding
# ##########################################################################

def encode_point(P, curve=SECP160R1):
    if P is None:
        raise ValueError("the point at infinity has no wire encoding")
    n = curve.coord_len
    return P.x.to_bytes(n, "big") + P.y.to_bytes(n, "big")


def decode_point(data, curve=SECP160R1):
    # no curve check: receivers must not trust decoded points
    n = curve.coord_len
    if len(data) != 2 * n:
        raise ValueError("expected %d bytes, got %d" % (2 * n, len(data)))
    return Point(int.from_bytes(data[:n], "big"), int.from_bytes(data[n:], "big"))


def encode_signature(sig, curve=SECP160R1):
    n = curve.scalar_len
    return sig.r.to_bytes(n, "big") + sig.s.to_bytes(n, "big")


def decode_signature(data, curve=SECP160R1):
    n = curve.scalar_len
    if len(data) != 2 * n:
        raise ValueError("expected %d bytes, got %d" % (2 * n, len(data)))
    return Signature(int.from_bytes(data[:n], "big"), int.from_bytes(data[n:], "big"))
