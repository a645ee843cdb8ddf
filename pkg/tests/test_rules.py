from dataclasses import replace

import pytest

from autosyn.chain import (
    AdjustRecord,
    Block,
    Certificate,
    Chain,
    GenesisBlock,
    Stakeholder,
    Transaction,
    vrf_input,
)
from autosyn.crypto import NONCE, TEST, KesFunctionality, RandomOracle, VrfFunctionality
from autosyn.rules import (
    ChainRules,
    ChainTooShortError,
    ResyncNeeded,
    apply_transactions,
    window_adjustment,
)


class Ctx:
    """Funcionalidades, chaves e regras compartilhadas pelos testes."""

    def __init__(self, stakes=None, **rule_kwargs):
        stakes = stakes or {"P1": 1, "P2": 1}
        self.vrf = VrfFunctionality(seed=0, l_vrf=32)
        self.kes = KesFunctionality(seed=0)
        self.oracle = RandomOracle(seed=0)
        self.vrf_keys = {p: self.vrf.keygen(p) for p in stakes}
        self.kes_keys = {p: self.kes.keygen(p) for p in stakes}
        holders = tuple(Stakeholder(p, self.vrf_keys[p].v_vrf, self.kes_keys[p].v_kes, v)
                        for p, v in sorted(stakes.items()))
        self.genesis = GenesisBlock(holders, "eta_1", 10, 10)
        params = dict(R=10, f=0.5, l_vrf=32, k=3, s=6)
        params.update(rule_kwargs)
        self.rules = ChainRules(self.genesis, vrf=self.vrf, kes=self.kes, oracle=self.oracle, **params)

    def forge(self, chain, sl, party="P1", t_now=None, st=(), y=0, sign=True, h=None):
        kp = self.vrf_keys[party]
        _, eta = self.rules.update_stake_dist(chain, self.rules.epoch_of(sl), strict=False)
        data = vrf_input(eta, sl, TEST)
        self.vrf.program(kp.v_vrf, data, y)
        crt = self.vrf.eval(kp, data)
        rho = self.vrf.eval(kp, vrf_input(eta, sl, NONCE))
        if t_now is None:
            t_now = (sl - 1) * 10 + 2
        block = Block(h=chain.tip_hash if h is None else h, st=tuple(st), sl=sl, t_now=t_now,
                      crt=Certificate(party, crt.y, crt.pi), rho=(rho.y, rho.pi))
        if sign:
            block = replace(block, sigma=self.kes.sign(self.kes_keys[party], block.header_bytes(), sl))
        return chain.extend(block)

    def chain(self, slots, party="P1", sign=True):
        c = Chain(self.genesis)
        for sl in slots:
            c = self.forge(c, sl, party, sign=sign)
        return c


def test_valid_chain_accepted():
    ctx = Ctx()
    c = ctx.chain([1, 2, 4])
    assert ctx.rules.validate(c, 100)
    # o segundo pedido usa o prefixo já validado
    assert ctx.rules.is_valid_chain(c, 100)
    assert ctx.rules.is_valid_chain(Chain(ctx.genesis), 0)


def test_future_block_is_not_permanent():
    ctx = Ctx()
    c = ctx.chain([1, 2])
    res = ctx.rules.validate(c, 5)
    assert not res and res.reason == "future" and res.index == 1
    assert ctx.rules.validate(c, 100)


@pytest.mark.parametrize("case, reason", [
    ("badhash", "badhash"),
    ("badslot", "badslot"),
    ("interval", "bad_time_interval"),
    ("threshold", "badvrf"),
    ("unsigned", "badsig"),
])
def test_invalid_blocks(case, reason):
    ctx = Ctx()
    c = ctx.chain([1, 3])
    if case == "badhash":
        c = ctx.forge(c, 4, h="00" * 32)
    elif case == "badslot":
        c = ctx.forge(c, 3, party="P2")
    elif case == "interval":
        c = ctx.forge(c, 4, t_now=45)
    elif case == "threshold":
        c = ctx.forge(c, 4, y=2 ** 32 - 1)
    else:
        c = ctx.forge(c, 4, sign=False)
    res = ctx.rules.validate(c, 1000)
    assert not res and res.reason == reason and res.index == 2
    assert ctx.rules.rejections[reason] == 1


def test_empty_epoch_rejected_unless_disabled():
    c_strict = Ctx()
    chain = c_strict.forge(c_strict.chain([1]), 25)
    assert c_strict.rules.validate(chain, 1000).reason == "empty_epoch"

    relaxed = Ctx(reject_empty_epochs=False)
    chain = relaxed.forge(relaxed.chain([1]), 25)
    assert relaxed.rules.validate(chain, 1000)


def test_transactions_update_balances_and_duplicates_rejected():
    ctx = Ctx(stakes={"P1": 2, "P2": 1})
    tx = Transaction("tx1", "P1", "P2", 1)
    c = ctx.forge(Chain(ctx.genesis), 1, st=[tx])
    assert ctx.rules.validate(c, 1000)
    dist, _ = ctx.rules.update_stake_dist(c, 3, strict=False)
    assert dist.as_dict == {"P1": 1, "P2": 2}
    dup = ctx.forge(c, 2, st=[tx])
    assert ctx.rules.validate(dup, 1000).reason == "invalid_state"
    overdraft = ctx.forge(c, 3, st=[Transaction("tx2", "P1", "P2", 5)])
    assert ctx.rules.validate(overdraft, 1000).reason == "invalid_state"


def test_stake_dist_requires_epoch_minus_two():
    ctx = Ctx()
    c = ctx.chain([1])
    dist, eta = ctx.rules.update_stake_dist(c, 2)
    assert eta == "eta_1" and dist.total == 2
    with pytest.raises(ChainTooShortError):
        ctx.rules.update_stake_dist(c, 4)
    ctx.rules.update_stake_dist(c, 4, strict=False)


def test_epoch_nonce_depends_on_early_slots():
    ctx = Ctx()
    base = ctx.chain([1], sign=False)
    early = ctx.chain([1, 12], sign=False)
    late = ctx.chain([1, 19], sign=False)
    # só os primeiros 2R/3 slots da época anterior entram no nonce
    assert ctx.rules.epoch_nonce(early, 3) != ctx.rules.epoch_nonce(base, 3)
    assert ctx.rules.epoch_nonce(late, 3) == ctx.rules.epoch_nonce(base, 3)
    assert ctx.rules.epoch_nonce(base, 2) == "eta_1"

def test_current_slot_number():
    ctx = Ctx()
    empty = Chain(ctx.genesis)
    assert ctx.rules.current_slot_number(0, empty) == (0, 0, 10)
    assert ctx.rules.current_slot_number(1, empty) == (1, 10, 10)
    assert ctx.rules.current_slot_number(10, empty) == (1, 10, 10)
    assert ctx.rules.current_slot_number(11, empty) == (2, 20, 10)
    with pytest.raises(ResyncNeeded):
        ctx.rules.current_slot_number(101, empty)
    c = ctx.chain([1])
    assert ctx.rules.current_slot_number(101, c) == (11, 110, 10)
    assert ctx.rules.slot_window(c, 11) == (100, 110)


def test_window_adjustment_formula():
    assert window_adjustment([12, 14], [4, 6], 10) == pytest.approx(0.4)
    assert window_adjustment([], [1], 10) == 0.0


def _measured_chain(ctx, t_recv, t_adj, b_last=None):
    c = Chain(ctx.genesis)
    b1 = Block(h=c.tip_hash, st=(), sl=1, t_now=2, crt=Certificate("P1", 0, "pi"), rho=(0, "pi"))
    c = c.extend(b1)
    rec = AdjustRecord(b_last or b1.hash, t_recv, "P2", 0, "pi", 1)
    b2 = Block(h=c.tip_hash, st=(), sl=2, t_now=12, crt=Certificate("P1", 0, "pi"), rho=(0, "pi"),
               a=((rec, t_adj),))
    return c.extend(b2)


def test_round_length_adjustment():
    ctx = Ctx()
    # a = 20 − 2 = 18, b = 20 − 15 = 5: 0.3·8 + 0.1·(−5) = 1.9
    report = ctx.rules.adjusting_next_round_length(_measured_chain(ctx, 20, 15), 2, [10])
    assert report.new == 12 and report.records_used == 1
    assert report.delta == pytest.approx(1.9)
    assert report.negative_components == 0


def test_round_length_clamped_and_negative_flagged():
    ctx = Ctx(t_round_min=8)
    # a = 0, b = −3: 0.3·(−10) + 0.1·(−13) = −4.3 -> 5.7, limitado a 8
    report = ctx.rules.adjusting_next_round_length(_measured_chain(ctx, 2, 5), 2, [10])
    assert report.new == 8 and report.negative_components == 1


def test_round_length_without_records_is_unchanged():
    ctx = Ctx()
    report = ctx.rules.adjusting_next_round_length(_measured_chain(ctx, 20, 15, b_last="ff"), 2, [10])
    assert report.new == 10 and report.records_used == 0
    assert ctx.rules.round_lengths(ctx.chain([1]), 3) == [10, 10, 10]


def test_round_length_ignores_window_without_records():
    ctx = Ctx()
    c = Chain(ctx.genesis)
    # janela 2 (slots 6–10) tem bloco mas nenhum registro
    c = c.extend(Block(h=c.tip_hash, st=(), sl=7, t_now=62, crt=Certificate("P1", 0, "pi"), rho=(0, "pi")))
    b11 = Block(h=c.tip_hash, st=(), sl=11, t_now=102, crt=Certificate("P1", 0, "pi"), rho=(0, "pi"))
    c = c.extend(b11)
    rec = AdjustRecord(b11.hash, 120, "P2", 0, "pi", 11)
    c = c.extend(Block(h=c.tip_hash, st=(), sl=12, t_now=112, crt=Certificate("P1", 0, "pi"),
                       rho=(0, "pi"), a=((rec, 115),)))
    # a = 18, b = 5: 0.3·8 + 0.1·(−5) = 1.9, sem ser dividido pela janela vazia
    report = ctx.rules.adjusting_next_round_length(c, 3, [10, 10])
    assert report.raw_values == pytest.approx((1.9, 0.0))
    assert report.delta == pytest.approx(1.9)
    assert report.new == 12


def test_apply_transactions():
    balances = {"P1": 2, "P2": 0}
    assert apply_transactions(balances, [Transaction("a", None, None)]) is balances
    assert apply_transactions(balances, [Transaction("b", "P1", "P2", 3)]) is None
    assert apply_transactions(balances, [Transaction("c", "P1", "P2", 2)]) == {"P1": 0, "P2": 2}


def test_select_rule():
    ctx = Ctx(selection="mc")
    short = ctx.chain([1])
    long = ctx.chain([1, 2])
    assert ctx.rules.select(short, [long]) is long
    with pytest.raises(ValueError):
        Ctx(R=1)
