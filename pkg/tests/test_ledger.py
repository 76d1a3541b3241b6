import os
import random
from decimal import Decimal

import pytest

from betauav import crypto
from betauav.crypto import SECP160R1
from betauav.ledger import (GasSchedule, Ledger, TxKind, UnknownContract, UnknownTx,
                            decode_session_payload, eth_cost, gas_units_for)

PRICE = Decimal("2.566484836")


def _keys(n, seed=0):
    rng = random.Random(seed)
    return [crypto.keygen(rng).pk for _ in range(n)]


def test_gas_units_oracle():
    # ETH / (gwei * 1e-9), rounded
    assert round(0.000555e9 / 2.566484836) == 216249
    assert round(0.000238e9 / 2.566484836) == 92734
    assert gas_units_for("0.000555") == 216249
    assert gas_units_for("0.000238") == 92734


def test_default_schedule_matches_reported_costs():
    s = GasSchedule()
    assert (s.deploy_gas, s.issue_gas, s.gas_price_gwei) == (216249, 92734, PRICE)
    assert abs(eth_cost(s.deploy_gas, PRICE) - Decimal("0.000555")) / Decimal("0.000555") < Decimal("0.005")
    assert abs(eth_cost(s.issue_gas, PRICE) - Decimal("0.000238")) / Decimal("0.000238") < Decimal("0.005")


def test_schedule_must_be_positive():
    with pytest.raises(ValueError):
        GasSchedule(deploy_gas=0)
    with pytest.raises(ValueError):
        GasSchedule(gas_price_gwei="-1")


def test_deploy(ledger):
    caller = _keys(1)[0]
    scid, txid = ledger.deploy_contract(caller)
    assert scid == txid
    tx = ledger.get_tx(scid)
    assert tx.kind is TxKind.DEPLOY and tx.gas_used == 216249 and tx.block_index == 0
    scid2, _ = ledger.deploy_contract(caller)
    assert scid2 != scid


def test_issue_roundtrip(ledger):
    a, b = _keys(2)
    scid, _ = ledger.deploy_contract(a)
    txid = ledger.issue_session(scid, b, a, b, 1234)
    tx = ledger.get_tx(txid)
    assert tx.kind is TxKind.ISSUE_SESSION and tx.gas_used == 92734
    assert decode_session_payload(tx.payload) == (a, b, 1234)
    assert (tx.pk_from, tx.pk_to, tx.t_issue) == (a, b, 1234)
    assert len(tx.payload) == 88
    assert ledger.contract(scid).registry[a] == [txid]


def test_issue_unknown_contract(ledger):
    a, b = _keys(2)
    with pytest.raises(UnknownContract):
        ledger.issue_session(b"\x00" * 32, a, a, b, 1)


def test_unknown_tx(ledger):
    with pytest.raises(UnknownTx):
        ledger.get_tx(os.urandom(32))


def test_latest_tx_for(ledger):
    a, b, c = _keys(3)
    scid, _ = ledger.deploy_contract(a)
    assert ledger.latest_tx_for(a, b) is None
    first = ledger.issue_session(scid, b, a, b, 1)
    assert ledger.latest_tx_for(a, b) == first
    second = ledger.issue_session(scid, b, a, b, 1)
    assert second != first
    assert ledger.latest_tx_for(a, b) == second
    assert ledger.latest_tx_for(a, c) is None


def test_rehash_and_registry_consistency(ledger):
    keys = _keys(5)
    scid, _ = ledger.deploy_contract(keys[0])
    rng = random.Random(3)
    for i in range(99):
        f, t = rng.sample(keys, 2)
        ledger.issue_session(scid, t, f, t, i)
    assert len(ledger) == 100
    for tx in ledger:
        assert crypto.h1(tx.canonical_bytes()) == tx.txid
    for pk, txids in ledger.contract(scid).registry.items():
        indexes = [ledger.get_tx(t).block_index for t in txids]
        assert indexes == sorted(indexes)
        assert all(ledger.get_tx(t).pk_from == pk for t in txids)


def test_block_index_strictly_increasing(ledger):
    a, b = _keys(2)
    scid, _ = ledger.deploy_contract(a)
    for i in range(10):
        ledger.issue_session(scid, a, a, b, i)
    assert [tx.block_index for tx in ledger] == list(range(11))


def test_gas_report(ledger):
    assert all(ln.count == 0 and ln.gas_units == 0 and ln.eth == 0
               for ln in ledger.gas_report().lines)
    a, b = _keys(2)
    scid, _ = ledger.deploy_contract(a)
    ledger.issue_session(scid, a, a, b, 0)
    rep = ledger.gas_report()
    dep, iss = rep.line(TxKind.DEPLOY), rep.line(TxKind.ISSUE_SESSION)
    assert dep.eth == Decimal("0.000554999779300164")
    assert iss.eth == Decimal("0.000238000404781624")
    for _ in range(6):
        ledger.issue_session(scid, a, a, b, 0)
    assert ledger.gas_report().line(TxKind.ISSUE_SESSION).eth == 7 * iss.eth


def test_replay_is_byte_identical():
    def build():
        led = Ledger()
        keys = _keys(4, seed=9)
        scid, _ = led.deploy_contract(keys[0])
        rng = random.Random(9)
        for i in range(50):
            f, t = rng.sample(keys, 2)
            led.issue_session(scid, t, f, t, rng.randrange(10 ** 6))
        return led.dump()
    assert build() == build()


def test_dump_format(ledger):
    a, b = _keys(2)
    scid, _ = ledger.deploy_contract(a)
    ledger.issue_session(scid, b, a, b, 7)
    lines = ledger.dump().splitlines()
    assert len(lines) == 2
    fields = dict(kv.split("=", 1) for kv in lines[1].split())
    assert fields["kind"] == "IssueSession" and fields["block_index"] == "1"
    assert bytes.fromhex(fields["txid"]) == ledger.latest_tx_for(a, b)
    assert fields["gas_used"] == "92734"


def test_ledger_offline(ledger):
    from betauav.ledger import LedgerUnavailable
    ledger.available = False
    with pytest.raises(LedgerUnavailable):
        ledger.deploy_contract(SECP160R1.g)
