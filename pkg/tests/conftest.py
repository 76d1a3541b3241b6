import random

import pytest

from betauav.ledger import Ledger
from betauav.pki import Role, register, ta_setup
from betauav.crypto import SECP160R1
from betauav.protocol import ProtocolConfig, Terminal

LIFETIME = 10_000_000


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def ledger():
    return Ledger()


@pytest.fixture
def ta(rng, ledger):
    ta, _ = ta_setup(SECP160R1, rng, ledger)
    return ta


@pytest.fixture
def pair(ta, rng, ledger):
    """Two registered UAV terminals sharing one ledger."""
    cfg = ProtocolConfig()
    a = Terminal(register(ta, Role.UAV, LIFETIME, rng), ledger, cfg, "uav0")
    b = Terminal(register(ta, Role.UAV, LIFETIME, rng), ledger, cfg, "uav1")
    return a, b


def handshake(a, b, t_s, t1, latency=5):
    """Run a full honest handshake a -> b at time t1; returns (rec_at_b, rec_at_a)."""
    req = a.init_request(t_s, t1)
    reply, rec_b = b.on_request(req, t1 + latency)
    rec_a = a.on_reply(reply, t1 + 2 * latency)
    return rec_b, rec_a


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
