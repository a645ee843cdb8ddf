import pytest

from autosyn.analysis import (
    BOT,
    CharString,
    OnsetSnapshot,
    RunTrace,
    SlotOutcome,
    allowed_images,
    bot_reduction,
    characteristic_string,
    check_cg,
    check_cg2,
    check_cp,
    check_cq,
    check_ecq,
    divergence,
    divergence_bruteforce,
    divergence_equivalence,
    divergence_recurrence,
    lemma3_case_audit,
    lemma6_rate_audit,
    real_reduction,
    reduced_string,
    slot_outcomes,
)
from autosyn.chain import Block, Certificate, Chain, GenesisBlock, Stakeholder

GENESIS = GenesisBlock((Stakeholder("P1", "v", "k", 1),), "eta", 10, 10)


def _extend(chain, slots, creator="P1"):
    for sl in slots:
        chain = chain.extend(Block(h=chain.tip_hash, st=(), sl=sl, t_now=sl * 10,
                                   crt=Certificate(creator, 0, "pi"), rho=(0, "pi")))
    return chain


def _chain(slots, creator="P1"):
    return _extend(Chain(GENESIS), slots, creator)


def test_char_string_symbols():
    w = CharString.parse("01" + BOT)
    assert str(w) == "01⊥" and len(w) == 3 and w.count("0") == 1
    with pytest.raises(ValueError):
        CharString.parse("012")


def test_reductions():
    # a mensagem do slot 1 não chegou: o 0 seguinte vira ⊥
    assert str(real_reduction("10", [False, True])) == "1⊥"
    assert str(real_reduction("00", [False, True])) == "0⊥"
    assert str(real_reduction("0101", [True, True, False, True])) == "0101"
    assert str(real_reduction("0100", [True, True, False, True])) == "010⊥"
    # o primeiro slot não tem round anterior
    assert str(real_reduction("0", [False])) == "0"
    # 1 nunca vira ⊥
    assert str(real_reduction("11", [False, False])) == "11"
    # slots vazios são pulados até o slot não vazio anterior
    assert str(real_reduction("1⊥⊥0", [False, True, True, True])) == "1⊥⊥⊥"
    # bloco anterior órfão: o terceiro 0 estende a cadeia do primeiro
    assert str(real_reduction("000", [False, False, True])) == "0⊥0"
    with pytest.raises(ValueError):
        real_reduction("01", [True])
    assert str(bot_reduction("0⊥1⊥0")) == "010"
    w = "0⊥1⊥0" * 10
    assert len(bot_reduction(w)) == 30


def test_reductions_keep_adversarial_slots():
    w = "10⊥0110⊥0"
    reduced = real_reduction(w, [False] * len(w))
    assert bot_reduction(reduced).count("1") == CharString.parse(w).count("1")
    # η = 1: a redução real é a identidade
    assert str(real_reduction(w, [True] * len(w))) == w


def test_slot_outcomes_and_delivery():
    c = _chain([1, 2, 5])
    blocks = {b.hash: b for b in c.blocks}
    leaders = {1: [("P1", True)], 2: [("P2", True), ("P3", True)], 5: [("P1", True)]}
    outcomes = slot_outcomes(5, leaders, blocks)
    assert str(characteristic_string(outcomes)) == "01⊥⊥0"
    assert str(reduced_string(outcomes)) == "01⊥⊥0"

    # bloco do slot 5 ignora o do slot 2: o 0 do slot 5 vira ⊥
    orphan = _chain([5])
    blocks = {b.hash: b for b in c.blocks[:2] + orphan.blocks}
    outcomes = slot_outcomes(5, leaders, blocks)
    assert str(reduced_string(outcomes)) == "01⊥⊥⊥"
    assert outcomes[0] == SlotOutcome(1, "0", True)
    assert outcomes[1] == SlotOutcome(2, "1", False)


def test_slot_outcomes_withheld_block():
    # líder adversarial do slot 1 não publica: o 0 do slot 2 não recebeu o round anterior
    c = _chain([2])
    blocks = {b.hash: b for b in c.blocks}
    leaders = {1: [("P2", False)], 2: [("P1", True)]}
    outcomes = slot_outcomes(2, leaders, blocks)
    assert outcomes[0] == SlotOutcome(1, "1", False)
    assert str(reduced_string(outcomes)) == "1⊥"


@pytest.mark.parametrize("w, expected", [
    ("", 0), ("0", 0), ("1", 1), ("00", 0), ("01", 1), ("10", 1), ("11", 2),
])
def test_divergence_small_cases(w, expected):
    assert divergence_bruteforce(w) == expected
    assert divergence_recurrence(w) == expected


def test_divergence_ignores_bot():
    assert divergence("1⊥1") == divergence("11")
    assert divergence("0" * 50 + "1") == divergence_recurrence("0" * 50 + "1")


def test_divergence_equivalence_exhaustive():
    assert divergence_equivalence(12) == []


def test_check_cp_detects_deep_fork():
    a = _chain([1, 2, 3])
    b = _extend(a.prefix(1), [4, 5], creator="P2")
    trace = RunTrace([OnsetSnapshot("P1", 6, 60, a), OnsetSnapshot("P2", 6, 60, b)])
    assert len(check_cp(trace, 1).violations) == 2
    assert check_cp(trace, 2).ok


def test_check_cp_across_slots():
    a = _chain([1, 2, 3])
    b = _extend(Chain(GENESIS), [4], creator="P2")
    trace = RunTrace([OnsetSnapshot("P1", 4, 40, a), OnsetSnapshot("P1", 5, 50, b)])
    report = check_cp(trace, 1)
    assert [v.slot for v in report.violations] == [5]
    assert report.checked == 2


def test_check_cg():
    stuck = RunTrace([OnsetSnapshot("P1", sl, sl * 10, _chain([1])) for sl in range(1, 5)])
    assert not check_cg(stuck, tau=0.5, s=2).ok
    growing = RunTrace([OnsetSnapshot("P1", sl, sl * 10, _chain(range(1, sl + 1))) for sl in range(1, 5)])
    assert check_cg(growing, tau=0.5, s=2).ok


def test_check_cg2_uses_shortest_chain():
    snaps = [OnsetSnapshot("P1", sl, sl * 10, _chain(range(1, sl + 1))) for sl in range(1, 5)]
    snaps.append(OnsetSnapshot("P2", 4, 40, _chain([1])))
    report = check_cg2(RunTrace(snaps), tau=0.5, s=2)
    assert [v.party for v in report.violations] == ["P2"]


def test_check_cq():
    c = _chain([1, 2, 3, 4])
    adversarial = {b.hash for b in c.blocks}
    trace = RunTrace([OnsetSnapshot("P1", 5, 50, c)], adversarial)
    assert not check_cq(trace, mu=0.5, k=2).ok
    assert check_cq(RunTrace([OnsetSnapshot("P1", 5, 50, c)]), mu=0.5, k=2).ok


def test_check_ecq_gap_up_to_horizon():
    c = _chain([1, 2])
    trace = RunTrace([OnsetSnapshot("P1", 10, 100, c)])
    report = check_ecq(trace, s=5)
    assert report.violations[0].witness["largest_gap"] == 6
    assert check_ecq(trace, s=7).ok


def test_case_audit_images_allowed():
    report = lemma3_case_audit(0.8, trials=2000, seed=1)
    assert report.disallowed == []
    assert report.ok
    assert set(report.images["00"]) == {"00", "0⊥"}
    assert set(report.images["01"]) == {"01"}
    assert set(report.images["10"]) == {"10", "1⊥"}
    assert set(report.images["11"]) == {"11"}
    assert set(report.images["000"]) == {"000", "0⊥0", "00⊥"}
    assert report.survival_rate == pytest.approx(0.8, abs=0.03)


def test_case_table_images():
    assert allowed_images("00") == {"00", "0⊥", "⊥0"}
    assert allowed_images("01") == {"01", "⊥1"}
    assert allowed_images("10") == {"10", "1⊥"}
    assert allowed_images("11") == {"11"}
    assert allowed_images("000") == {"000", "0⊥0", "⊥⊥0", "00⊥"}
    with pytest.raises(ValueError):
        allowed_images("0000")


def test_rate_audit():
    reduced = CharString.parse("0" * 620 + "1" * 80 + BOT * 300)
    report = lemma6_rate_audit(reduced, alpha=0.9, f=0.05, eta=0.8)
    assert report.slots == 1000
    assert report.bound_zero == pytest.approx(0.9 * 0.95 ** 2 * 0.8)
    assert report.bound_bot == pytest.approx(0.96)
    assert report.ok
    low = lemma6_rate_audit(CharString.parse("0" * 500 + BOT * 500), alpha=0.9, f=0.05, eta=0.8)
    assert not low.zero_ok
    with pytest.raises(ValueError):
        lemma6_rate_audit(CharString(()), alpha=0.9, f=0.05, eta=0.8)
