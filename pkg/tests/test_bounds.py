from dataclasses import replace
from decimal import Decimal, localcontext
import math

import pytest

from autosyn.bounds import (
    AdmissibilityError,
    BoundParams,
    ConstraintError,
    admissibility_margin,
    bound_cg,
    bound_cp,
    bound_cq,
    bound_ecq,
    bound_theorem2_extra,
    bound_theorem4,
    bounds_row,
    bounds_table,
    check_constraints,
    chernoff_lower_tail,
    divergence_tail,
    epoch_cg,
    epoch_cp,
    epoch_cq,
    epsilon_lift,
    expand_grid,
    hcg,
    hcq,
    honest_count_tail,
    is_admissible,
    lift_composite,
    margin_tail,
    require_admissible,
    single_epoch_cg,
    single_epoch_cp,
    single_epoch_ecq,
)

# conjuntos fixados: o primeiro é inadmissível, os outros dois não
SET_A = BoundParams(f=0.05, eta=2 / 3, alpha=0.9, beta=0.9, epsilon=0.5,
                    R=1000, L=10_000, Q=100_000, k=500, s=1000)
SET_B = BoundParams(f=0.05, eta=0.95, alpha=0.95, beta=0.9, epsilon=0.2,
                    R=100_000, L=10_000, Q=1000, k=5000, s=5000)
SET_C = BoundParams(f=0.1, eta=1.0, alpha=1.0, beta=1.0, epsilon=0.3,
                    R=50, L=100, Q=10, k=20, s=30)


def _reference(p: BoundParams) -> dict:
    """Mesmas fórmulas em aritmética decimal de 50 dígitos."""
    with localcontext() as ctx:
        ctx.prec = 50
        f, eta, beta, eps = (Decimal(p.f), Decimal(p.eta), Decimal(p.beta), Decimal(p.epsilon))
        R, L, Q, k, s = (Decimal(p.R), Decimal(p.L), Decimal(p.Q), Decimal(p.k), Decimal(p.s))
        rate = eps * f * beta * eta
        eps4 = eps ** 4
        lift = Q * L * (R ** 3 * (-(rate ** 2) * R / 768).exp()
                        + 38 * R / eps4 * (2 - eps4 * f * beta * eta * R / 864).exp())
        values = {
            "eps_lift": lift,
            "eps_cp": 19 * L / eps4 * (2 - eps4 * k / 18).exp() + lift,
            "eps_cg": s * L ** 2 / 2 * (-(rate ** 2) * s / 256).exp() + lift,
            "eps_ecq": (s + 1) * L ** 2 * (-(rate ** 2) * s / 64).exp() + lift,
            "eps_cq": k * L ** 2 / 2 * (-(rate ** 2) * k / 256).exp() + lift,
            "divergence_tail": 19 * R / eps4 * (-eps4 * k / 18).exp(),
            "epoch_cp": 19 * R / eps4 * (2 - eps4 * k / 18).exp(),
        }
    return {name: float(value) for name, value in values.items()}


@pytest.mark.parametrize("params", [SET_A, SET_B, SET_C], ids=["set_a", "set_b", "set_c"])
def test_bounds_match_decimal_reference(params):
    expected = _reference(params)
    got = {
        "eps_lift": epsilon_lift(params),
        "eps_cp": bound_cp(params, strict=False),
        "eps_cg": bound_cg(params, strict=False),
        "eps_ecq": bound_ecq(params, strict=False),
        "eps_cq": bound_cq(params, strict=False),
        "divergence_tail": divergence_tail(params),
        "epoch_cp": epoch_cp(params),
    }
    for name, value in expected.items():
        assert got[name] == pytest.approx(value, rel=1e-10), name


def test_single_epoch_cp_value():
    # r=10³, ε=0.5, k=300: 304000·exp(2 − 300/288)
    p = replace(SET_A, R=1000, k=300)
    with localcontext() as ctx:
        ctx.prec = 50
        expected = float(Decimal(304000) * (Decimal(2) - Decimal(300) / Decimal(288)).exp())
    assert epoch_cp(p) == pytest.approx(expected, rel=1e-10)
    assert 7.9e5 < epoch_cp(p) < 8.0e5


def test_admissibility():
    assert not is_admissible(SET_A)
    assert is_admissible(SET_B)
    assert admissibility_margin(SET_B) == pytest.approx(0.95 * 0.9025 * 0.95 - 0.6)
    with pytest.raises(AdmissibilityError):
        require_admissible(SET_A)
    with pytest.raises(AdmissibilityError):
        bound_cp(SET_A)
    # modo não estrito só calcula
    assert bound_cp(SET_A, strict=False) > 0


def test_floor_checks():
    # piso de CG: 96/(εβfη) = 96/0.00855 ≈ 11228
    with pytest.raises(ConstraintError):
        epoch_cg(SET_B, s=1000)
    assert epoch_cg(SET_B, s=12_000) > 0
    with pytest.raises(ConstraintError):
        bound_cg(SET_B)
    with pytest.raises(ConstraintError):
        hcg(SET_C, s=10, r=50)


def test_bg_extra_rejects_window_beyond_sixth_of_epoch():
    # k/(4f) = 25000 > R/6
    with pytest.raises(ConstraintError):
        bound_theorem2_extra(SET_B)
    assert bound_theorem2_extra(SET_B, strict=False) > 0


def test_monotonicity():
    assert divergence_tail(SET_C, k=2000) < divergence_tail(SET_C, k=1000)
    assert single_epoch_cg(SET_C, 30, 100) > single_epoch_cg(SET_C, 30, 50)
    assert bound_cp(SET_B, k=50_000, strict=False) < bound_cp(SET_B, k=5000, strict=False)


def test_lift_vanishes_for_long_epochs():
    small = epsilon_lift(replace(SET_C, R=1_000_000))
    huge = epsilon_lift(replace(SET_C, R=100_000_000))
    assert huge < small
    assert huge < 1e-12


def test_check_constraints_lists_every_issue():
    issues = check_constraints(SET_A)
    assert any(i.startswith("inadmissível") for i in issues)
    assert any("CG" in i for i in issues)
    assert any("CQ" in i for i in issues)
    assert any("delay" in i for i in issues)
    assert not any("gate" in i for i in check_constraints(replace(SET_A, gate="none")))


def test_bounds_table_rows_and_grid():
    rows = bounds_table(expand_grid(SET_C, "k", [20, 40, 80]))
    assert [row["k"] for row in rows] == [20, 40, 80]
    assert all(row["flags"] for row in rows)
    row = bounds_row(SET_C)
    assert row["admissible"] is True
    assert row["eps_cp"] == pytest.approx(bound_cp(SET_C, strict=False))
    with pytest.raises(ValueError):
        expand_grid(SET_C, "nao_existe", [1])


def test_params_validation():
    with pytest.raises(ValueError):
        BoundParams.from_dict({**SET_C.to_dict(), "extra": 1})
    with pytest.raises(ValueError):
        replace(SET_C, delta=3)
    with pytest.raises(ValueError):
        replace(SET_C, gate="qualquer")
    with pytest.raises(ValueError):
        replace(SET_C, epsilon=1.0)
    assert BoundParams.from_dict(SET_C.to_dict()) == SET_C


def test_auxiliary_tails():
    with localcontext() as ctx:
        ctx.prec = 50
        expected = float(2 * Decimal(-0.25).exp())
    assert honest_count_tail(0.5, 64) == pytest.approx(expected, rel=1e-12)


def test_tail_helpers_and_single_epoch_variants():
    assert chernoff_lower_tail(0.5, 8, 1.0) == pytest.approx(math.exp(-2.0))
    assert margin_tail(1.0, 63, 1.0) == pytest.approx(64 * math.exp(-63 / 64))
    # piso de CQ de época única: 96/(εβfη) = 3200 no conjunto C
    with pytest.raises(ConstraintError):
        epoch_cq(SET_C)
    assert epoch_cq(SET_C, strict=False) == pytest.approx(0.5 * 20 * 50 ** 2 * math.exp(-0.0009 * 20 / 256))
    with pytest.raises(ConstraintError):
        hcq(SET_C, s=100, r=50)
    assert hcq(SET_C, s=100, r=50, strict=False) > 0


def test_bound_theorem4_requires_admissibility():
    assert bound_theorem4(SET_B) == pytest.approx(divergence_tail(SET_B))
    with pytest.raises(AdmissibilityError):
        bound_theorem4(SET_A)


def test_lift_composite_sums_single_epoch_terms():
    third = SET_C.R / 3
    tau = SET_C.beta * SET_C.f * SET_C.eta / 16
    expected = SET_C.Q * SET_C.L * 2 * (
        single_epoch_cg(SET_C, third, SET_C.R)
        + single_epoch_cp(SET_C, tau * third, SET_C.R)
        + single_epoch_ecq(SET_C, third, SET_C.R)
    )
    assert lift_composite(SET_C) == pytest.approx(expected)
    assert bounds_row(SET_C)["lift_composite"] == pytest.approx(expected)
