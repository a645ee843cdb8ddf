import pytest

from autosyn.chain import (
    AdjustRecord,
    Block,
    Certificate,
    Chain,
    GenesisBlock,
    InitError,
    InitFunctionality,
    Stakeholder,
    maxvalid_bg,
    maxvalid_mc,
    phi,
    threshold,
)
from autosyn.crypto import RandomOracle


def _genesis():
    holders = (Stakeholder("P1", "v1", "k1", 1), Stakeholder("P2", "v2", "k2", 1))
    return GenesisBlock(holders, "eta", 10, 10)


def _block(parent: Chain, sl: int, creator: str) -> Block:
    return Block(h=parent.tip_hash, st=(), sl=sl, t_now=sl * 10, crt=Certificate(creator, 0, "pi"),
                 rho=(0, "pi"))


def _chain(slots, creator="P1", base=None):
    chain = base if base is not None else Chain(_genesis())
    for sl in slots:
        chain = chain.extend(_block(chain, sl, creator))
    return chain


def test_genesis_validation():
    with pytest.raises(ValueError):
        GenesisBlock((Stakeholder("P1", "a", "b", 1), Stakeholder("P1", "c", "d", 1)), "eta", 0, 10)
    with pytest.raises(ValueError):
        GenesisBlock((Stakeholder("P1", "a", "b", 0),), "eta", 0, 10)
    assert _genesis().stakes() == {"P1": 1, "P2": 1}


def test_hash_covers_content():
    c = _chain([1, 2])
    other = _chain([1, 3])
    assert c.blocks[0].hash == other.blocks[0].hash
    assert c.tip_hash != other.tip_hash
    assert c.blocks[1].h == c.blocks[0].hash


def test_prefix_operations():
    c = _chain([1, 2, 3, 4])
    assert c.truncated(1).slots == (1, 2, 3)
    assert c.truncated(10).length == 0
    assert c.prefix(2).is_prefix_of(c)
    assert not c.is_prefix_of(c.prefix(2))
    fork = _chain([5], creator="P2", base=c.prefix(2))
    assert c.common_prefix_length(fork) == 2
    assert c.summary() == [("P1", 1), ("P1", 2), ("P1", 3), ("P1", 4)]


def test_adjust_record_requires_both_or_neither():
    AdjustRecord(None, None, "P1", 0, "pi", 3)
    AdjustRecord("h", 12, "P1", 0, "pi", 3)
    with pytest.raises(ValueError):
        AdjustRecord("h", None, "P1", 0, "pi", 3)


def test_phi_and_threshold():
    assert phi(0.5, 1.0) == pytest.approx(0.5)
    assert phi(0.5, 0.0) == 0.0
    # independência de agregação
    a, b = 0.2, 0.3
    assert 1 - phi(0.1, a + b) == pytest.approx((1 - phi(0.1, a)) * (1 - phi(0.1, b)))
    assert threshold(0.5, 1.0, 32) == 2 ** 31
    with pytest.raises(ValueError):
        phi(0.0, 0.5)
    with pytest.raises(ValueError):
        phi(0.5, 1.5)


def test_maxvalid_mc_prefers_longer_then_local():
    local = _chain([1, 2])
    same = _chain([1, 3])
    longer_a = _chain([1, 4, 5])
    longer_b = _chain([2, 4, 5], creator="P2")
    assert maxvalid_mc(local, [same]) is local
    assert maxvalid_mc(local, [longer_a, longer_b]) is longer_a


def test_maxvalid_bg_short_fork_uses_length():
    local = _chain([1, 2, 3])
    cand = _chain([4, 5], creator="P2", base=local.prefix(2))
    assert maxvalid_bg(local, [cand], k=2, s=4) is cand


def test_maxvalid_bg_deep_fork_uses_density():
    local = _chain([1, 3, 5, 7, 9])
    # mais curta, porém mais densa logo após o fork
    cand = _chain([1, 2, 3, 4], creator="P2")
    assert maxvalid_bg(local, [cand], k=2, s=4) is cand
    assert maxvalid_mc(local, [cand]) is local


def test_init_functionality_builds_genesis_once():
    init = InitFunctionality({"P1": 2, "P2": 1}, t_start=5, t_round_1=10, oracle=RandomOracle(0))
    assert init.submit_keys("P1", "v1", "k1", now=-3)
    assert not init.submit_keys("P3", "v3", "k3", now=-3)
    with pytest.raises(InitError):
        init.submit_keys("P2", "v1", "k2", now=-2)
    init.submit_keys("P2", "v2", "k2", now=-2)
    assert not init.submit_keys("P2", "v2", "k2", now=0)
    assert init.genesis(-1) is None
    g = init.genesis(0)
    assert g.stakes() == {"P1": 2, "P2": 1}
    assert init.genesis(4) is g


def test_genesis_missing_keys_aborts():
    init = InitFunctionality({"P1": 1, "P2": 1}, t_start=5, t_round_1=10, oracle=RandomOracle(0))
    init.submit_keys("P1", "v1", "k1", now=-1)
    with pytest.raises(InitError):
        init.genesis(0)
