"""In-process emulation of the chain and the session-registry contract.

One transaction per block. Transaction ids are SHA-256 over
``kind || caller || payload || block_index`` so identical payloads appended
at different heights never collide.
"""

import enum
import hashlib
import struct
import threading
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional

from .crypto import SECP160R1, Point, decode_point, encode_point


class LedgerError(Exception):
    pass


class LedgerUnavailable(LedgerError):
    pass


class UnknownContract(LedgerError):
    pass


class UnknownTx(LedgerError, KeyError):
    pass


class TxKind(enum.Enum):
    DEPLOY = 0x01
    ISSUE_SESSION = 0x02

    @property
    def label(self):
        return "Deploy" if self is TxKind.DEPLOY else "IssueSession"


GWEI = Decimal("1e-9")
ETH_PLACES = Decimal("1e-18")

# Reported on-chain costs the default schedule is fitted to.
PUBLISHED_GAS_PRICE_GWEI = Decimal("2.566484836")
PUBLISHED_DEPLOY_ETH = Decimal("0.000555")
PUBLISHED_ISSUE_ETH = Decimal("0.000238")
PUBLISHED_DEPLOY_ESTIMATED_ETH = Decimal("0.0005499")
PUBLISHED_ISSUE_ESTIMATED_ETH = Decimal("0.00023767")


def gas_units_for(eth, gas_price_gwei=PUBLISHED_GAS_PRICE_GWEI):
    """Nearest whole gas count whose cost at ``gas_price_gwei`` is ``eth``."""
    units = Decimal(eth) / (Decimal(gas_price_gwei) * GWEI)
    return int(units.to_integral_value())


def eth_cost(units, gas_price_gwei):
    return (Decimal(units) * Decimal(gas_price_gwei) * GWEI).quantize(ETH_PLACES)


@dataclass(frozen=True)
class GasSchedule:
    deploy_gas: int = 216249
    issue_gas: int = 92734
    gas_price_gwei: Decimal = PUBLISHED_GAS_PRICE_GWEI

    def __post_init__(self):
        object.__setattr__(self, "gas_price_gwei", Decimal(str(self.gas_price_gwei)))
        if self.deploy_gas <= 0 or self.issue_gas <= 0 or self.gas_price_gwei <= 0:
            raise ValueError("gas schedule entries must be strictly positive")

    def gas_for(self, kind):
        return self.deploy_gas if kind is TxKind.DEPLOY else self.issue_gas


# Stands in for the compiled contract; only its hash reaches the chain.
CONTRACT_CODE = b"betauav session registry v1: issue(pk_from, pk_to, t)"


@dataclass(frozen=True)
class LedgerTransaction:
    txid: bytes
    kind: TxKind
    caller: Point
    payload: bytes
    block_index: int
    gas_used: int
    scid: Optional[bytes] = None
    pk_from: Optional[Point] = None
    pk_to: Optional[Point] = None
    t_issue: Optional[int] = None

    def canonical_bytes(self, curve=SECP160R1):
        return canonical_tx_bytes(self.kind, self.caller, self.payload,
                                  self.block_index, curve)


def canonical_tx_bytes(kind, caller, payload, block_index, curve=SECP160R1):
    return (bytes([kind.value]) + encode_point(caller, curve) + payload
            + struct.pack(">Q", block_index))


def encode_session_payload(pk_from, pk_to, t, curve=SECP160R1):
    return encode_point(pk_from, curve) + encode_point(pk_to, curve) + struct.pack(">Q", t)


def decode_session_payload(data, curve=SECP160R1):
    n = curve.point_len
    if len(data) != 2 * n + 8:
        raise ValueError("bad session payload length %d" % len(data))
    return (decode_point(data[:n], curve), decode_point(data[n:2 * n], curve),
            struct.unpack(">Q", data[2 * n:])[0])


@dataclass
class ContractState:
    scid: bytes
    registry: dict = field(default_factory=dict)   # pk_from -> [txid, ...]


@dataclass(frozen=True)
class GasLine:
    kind: TxKind
    count: int
    gas_units: int
    eth: Decimal


@dataclass(frozen=True)
class GasReport:
    lines: tuple
    gas_price_gwei: Decimal

    def line(self, kind):
        for ln in self.lines:
            if ln.kind is kind:
                return ln
        raise KeyError(kind)

    @property
    def total_eth(self):
        return sum((ln.eth for ln in self.lines), Decimal(0)).quantize(ETH_PLACES)


class Ledger:
    """Append-only transaction log with a single serialization point."""

    def __init__(self, curve=SECP160R1, schedule=None):
        self.curve = curve
        self.schedule = schedule or GasSchedule()
        self.available = True
        self._log = []
        self._by_id = {}
        self._contracts = {}
        self._latest_pair = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._log)

    def __iter__(self):
        return iter(list(self._log))

    def _append(self, kind, caller, payload, schedule, **decoded):
        if not self.available:
            raise LedgerUnavailable("ledger is offline")
        schedule = schedule or self.schedule
        with self._lock:
            index = len(self._log)
            raw = canonical_tx_bytes(kind, caller, payload, index, self.curve)
            txid = hashlib.sha256(raw).digest()
            if txid in self._by_id:
                raise LedgerError("transaction id collision at height %d" % index)
            tx = LedgerTransaction(txid, kind, caller, payload, index,
                                   schedule.gas_for(kind), **decoded)
            self._log.append(tx)
            self._by_id[txid] = tx
            return tx

    def deploy_contract(self, caller, schedule=None):
        """Append a Deploy transaction; returns ``(scid, txid)`` with scid == txid."""
        code_hash = hashlib.sha256(CONTRACT_CODE).digest()
        tx = self._append(TxKind.DEPLOY, caller, code_hash, schedule)
        self._contracts[tx.txid] = ContractState(tx.txid)
        return tx.txid, tx.txid

    def issue_session(self, scid, caller, pk_from, pk_to, t, schedule=None):
        contract = self._contracts.get(scid)
        if contract is None:
            raise UnknownContract(scid.hex() if isinstance(scid, bytes) else repr(scid))
        payload = encode_session_payload(pk_from, pk_to, t, self.curve)
        tx = self._append(TxKind.ISSUE_SESSION, caller, payload, schedule,
                          scid=scid, pk_from=pk_from, pk_to=pk_to, t_issue=t)
        contract.registry.setdefault(pk_from, []).append(tx.txid)
        self._latest_pair[(pk_from, pk_to)] = tx.txid
        return tx.txid

    def get_tx(self, txid):
        try:
            return self._by_id[txid]
        except KeyError:
            raise UnknownTx(txid.hex() if isinstance(txid, bytes) else repr(txid)) from None

    def latest_tx_for(self, pk_from, pk_to):
        return self._latest_pair.get((pk_from, pk_to))

    def contract(self, scid):
        try:
            return self._contracts[scid]
        except KeyError:
            raise UnknownContract(scid.hex()) from None

    def gas_report(self):
        lines = []
        for kind in TxKind:
            txs = [tx for tx in self._log if tx.kind is kind]
            units = sum(tx.gas_used for tx in txs)
            lines.append(GasLine(kind, len(txs), units,
                                 eth_cost(units, self.schedule.gas_price_gwei)))
        return GasReport(tuple(lines), self.schedule.gas_price_gwei)

    def dump(self):
        """Line-delimited text records, one per transaction, in append order."""
        out = []
        for tx in self._log:
            out.append("txid=%s kind=%s caller=%s payload=%s block_index=%d gas_used=%d"
                       % (tx.txid.hex(), tx.kind.label,
                          encode_point(tx.caller, self.curve).hex(),
                          tx.payload.hex(), tx.block_index, tx.gas_used))
        return "\n".join(out) + ("\n" if out else "")
