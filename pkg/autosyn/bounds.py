"""Calculadoras fechadas das probabilidades de erro das garantias de segurança.

Funcionalidades:
- Limites de execução completa: ε_CP, ε_CG, ε_∃CQ, ε_CQ e o termo de levantamento ε_lift
- Termo extra para maxvalid-bg e limite de divergência
- Limites de época única (CP, CG, CQ, ∃CQ, HCG, HCQ) e a composição multi-época
- Caudas de Chernoff auxiliares
- Tabela de limites para uma grade de parâmetros, com restrições sinalizadas por linha
"""
from dataclasses import asdict, dataclass, replace
from typing import Any, Dict, List, Optional
import logging
import math

logger = logging.getLogger(__name__)

DELTA_ROUNDS = 2
GATES = ("delay", "lift", "none")


class AdmissibilityError(ValueError):
    """α(1−f)²η > (1+ε)/2 não vale para os parâmetros."""


class ConstraintError(ValueError):
    """Parâmetro abaixo do piso exigido pela garantia."""


@dataclass(frozen=True)
class BoundParams:
    f: float
    eta: float
    alpha: float
    beta: float
    epsilon: float
    R: int
    L: int
    Q: int
    k: int
    s: int
    gamma: Optional[float] = None
    tau_cg: Optional[float] = None
    mu: Optional[float] = None
    delta: int = DELTA_ROUNDS
    l_vrf: int = 32
    omega: float = 1 / 20
    gate: str = "delay"

    def __post_init__(self):
        if not 0.0 < self.f <= 1.0:
            raise ValueError(f"f fora de (0, 1]: {self.f}")
        for name in ("eta", "alpha", "beta"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} fora de [0, 1]: {value}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"ε fora de (0, 1): {self.epsilon}")
        if min(self.R, self.L, self.Q, self.k, self.s) < 1:
            raise ValueError("R, L, Q, k e s devem ser positivos")
        if self.delta != DELTA_ROUNDS:
            raise ValueError(f"Δ é fixo em {DELTA_ROUNDS} rounds")
        if self.gate not in GATES:
            raise ValueError(f"Gate desconhecido: {self.gate} (opções: {', '.join(GATES)})")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BoundParams":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"Parâmetros desconhecidos: {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @property
    def rate(self) -> float:
        """εfβη, a taxa que aparece em todos os expoentes."""
        return self.epsilon * self.f * self.beta * self.eta

    @property
    def default_tau(self) -> float:
        return self.beta * self.f * self.eta / 16


# ----------------------------------------------------------------------
# Restrições
# ----------------------------------------------------------------------
def admissibility_margin(p: BoundParams) -> float:
    return p.alpha * (1 - p.f) ** 2 * p.eta - (1 + p.epsilon) / 2


def is_admissible(p: BoundParams) -> bool:
    return admissibility_margin(p) > 0


def require_admissible(p: BoundParams) -> None:
    if not is_admissible(p):
        raise AdmissibilityError(
            f"α(1−f)²η = {p.alpha * (1 - p.f) ** 2 * p.eta:.6f} não excede (1+ε)/2 = {(1 + p.epsilon) / 2:.6f}"
        )


def cg_floor(p: BoundParams) -> float:
    return 96 / (p.epsilon * p.beta * p.f * p.eta)


def ecq_floor(p: BoundParams) -> float:
    return 24 / (p.epsilon * p.beta * p.f * p.eta)


def cq_floor(p: BoundParams) -> float:
    return 96 / (p.epsilon * p.beta * p.f * p.eta)


def epoch_gate(p: BoundParams) -> Optional[float]:
    """Comprimento mínimo de época exigido pelo gate selecionado."""
    if p.gate == "delay":
        return 144 * p.delta / (p.epsilon * p.beta * p.f * p.eta)
    if p.gate == "lift":
        return 288 / (p.epsilon * p.beta * p.f)
    return None


def check_constraints(p: BoundParams) -> List[str]:
    """Lista legível das restrições violadas (vazia quando tudo vale)."""
    issues = []
    if not is_admissible(p):
        issues.append("inadmissível: α(1−f)²η ≤ (1+ε)/2")
    if p.s < cg_floor(p):
        issues.append(f"s={p.s} abaixo do piso de CG {cg_floor(p):.2f}")
    if p.s < ecq_floor(p):
        issues.append(f"s={p.s} abaixo do piso de ∃CQ {ecq_floor(p):.2f}")
    if p.k < cq_floor(p):
        issues.append(f"k={p.k} abaixo do piso de CQ {cq_floor(p):.2f}")
    gate = epoch_gate(p)
    if gate is not None and p.R < gate:
        issues.append(f"R={p.R} abaixo do gate {p.gate} ({gate:.2f})")
    return issues


def _floor_check(value: float, floor: float, what: str) -> None:
    if value < floor:
        raise ConstraintError(f"{what}={value} abaixo do piso exigido {floor:.4f}")


# ----------------------------------------------------------------------
# Época única
# ----------------------------------------------------------------------
def divergence_tail(p: BoundParams, k: Optional[float] = None, r: Optional[float] = None) -> float:
    """Pr[div ≥ k+2] ≤ (19r/ε⁴)·exp(−ε⁴k/18)."""
    k = p.k if k is None else k
    r = p.R if r is None else r
    return 19 * r / p.epsilon ** 4 * math.exp(-p.epsilon ** 4 * k / 18)


def single_epoch_cp(p: BoundParams, k: float, r: float) -> float:
    """(19r/ε⁴)·exp(2 − ε⁴k/18)."""
    return 19 * r / p.epsilon ** 4 * math.exp(2 - p.epsilon ** 4 * k / 18)


def epoch_cp(p: BoundParams, k: Optional[float] = None, r: Optional[float] = None) -> float:
    return single_epoch_cp(p, p.k if k is None else k, p.R if r is None else r)


def single_epoch_cg(p: BoundParams, s: float, r: float) -> float:
    """½·s·r²·exp(−(εfβη)²s/256)."""
    return 0.5 * s * r ** 2 * math.exp(-p.rate ** 2 * s / 256)


def epoch_cg(p: BoundParams, s: Optional[float] = None, r: Optional[float] = None, strict: bool = True) -> float:
    s = p.s if s is None else s
    if strict:
        _floor_check(s, cg_floor(p), "s")
    return single_epoch_cg(p, s, p.R if r is None else r)


def single_epoch_cq(p: BoundParams, k: float, r: float) -> float:
    """½·k·r²·exp(−(εfβη)²k/256)."""
    return 0.5 * k * r ** 2 * math.exp(-p.rate ** 2 * k / 256)


def epoch_cq(p: BoundParams, k: Optional[float] = None, r: Optional[float] = None, strict: bool = True) -> float:
    k = p.k if k is None else k
    if strict:
        _floor_check(k, cq_floor(p), "k")
    return single_epoch_cq(p, k, p.R if r is None else r)


def single_epoch_ecq(p: BoundParams, s: float, r: float) -> float:
    """r²·(s+1)·exp(−(εfβη)²s/64)."""
    return r ** 2 * (s + 1) * math.exp(-p.rate ** 2 * s / 64)


def hcg(p: BoundParams, s: float, r: float, strict: bool = True) -> float:
    """2r²·exp(−(fβη)²s/64), para s ≥ 16/(βfη)."""
    if strict:
        _floor_check(s, 16 / (p.beta * p.f * p.eta), "s")
    return 2 * r ** 2 * math.exp(-(p.f * p.beta * p.eta) ** 2 * s / 64)


def hcq(p: BoundParams, s: float, r: float, strict: bool = True) -> float:
    """r²(s+1)·exp(−(εfβη)²s/64), para s ≥ 32/(εβfη)."""
    if strict:
        _floor_check(s, 32 / (p.epsilon * p.beta * p.f * p.eta), "s")
    return r ** 2 * (s + 1) * math.exp(-p.rate ** 2 * s / 64)


def lift_composite(p: BoundParams) -> float:
    """QL·(2·CG(τ, R/3; R) + 2·CP(τR/3; R) + 2·∃CQ(R/3; R)) com τ = βfη/16."""
    tau = p.default_tau
    third = p.R / 3
    return p.Q * p.L * (
        2 * single_epoch_cg(p, third, p.R)
        + 2 * single_epoch_cp(p, tau * third, p.R)
        + 2 * single_epoch_ecq(p, third, p.R)
    )


def epsilon_lift(p: BoundParams) -> float:
    """QL·[R³·exp(−(εfβη)²R/768) + (38R/ε⁴)·exp(2 − ε⁴fβηR/864)]."""
    first = p.R ** 3 * math.exp(-p.rate ** 2 * p.R / 768)
    second = 38 * p.R / p.epsilon ** 4 * math.exp(2 - p.epsilon ** 4 * p.f * p.beta * p.eta * p.R / 864)
    return p.Q * p.L * (first + second)


# ----------------------------------------------------------------------
# Execução completa
# ----------------------------------------------------------------------
def bound_cp(p: BoundParams, k: Optional[float] = None, strict: bool = True) -> float:
    """ε_CP(k) = (19L/ε⁴)·exp(2 − ε⁴k/18) + ε_lift."""
    if strict:
        require_admissible(p)
    k = p.k if k is None else k
    return 19 * p.L / p.epsilon ** 4 * math.exp(2 - p.epsilon ** 4 * k / 18) + epsilon_lift(p)


def bound_cg(p: BoundParams, s: Optional[float] = None, strict: bool = True) -> float:
    """ε_CG(τ, s) = (sL²/2)·exp(−(εfβη)²s/256) + ε_lift."""
    s = p.s if s is None else s
    if strict:
        require_admissible(p)
        _floor_check(s, cg_floor(p), "s")
    return s * p.L ** 2 / 2 * math.exp(-p.rate ** 2 * s / 256) + epsilon_lift(p)


def bound_ecq(p: BoundParams, s: Optional[float] = None, strict: bool = True) -> float:
    """ε_∃CQ(s) = (s+1)L²·exp(−(εfβη)²s/64) + ε_lift."""
    s = p.s if s is None else s
    if strict:
        require_admissible(p)
        _floor_check(s, ecq_floor(p), "s")
    return (s + 1) * p.L ** 2 * math.exp(-p.rate ** 2 * s / 64) + epsilon_lift(p)


def bound_cq(p: BoundParams, k: Optional[float] = None, strict: bool = True) -> float:
    """ε_CQ(μ, k) = (kL²/2)·exp(−(εfβη)²k/256) + ε_lift."""
    k = p.k if k is None else k
    if strict:
        require_admissible(p)
        _floor_check(k, cq_floor(p), "k")
    return k * p.L ** 2 / 2 * math.exp(-p.rate ** 2 * k / 256) + epsilon_lift(p)


def bound_theorem4(p: BoundParams, strict: bool = True) -> float:
    if strict:
        require_admissible(p)
    return divergence_tail(p)


def bound_theorem2_extra(p: BoundParams, strict: bool = True) -> float:
    """exp(ln L − ωk) + ε_CG(βfη/16, k/(4f)) + ε_∃CQ(k/(4f)) + ε_CP(kβη/64)."""
    s = p.k / (4 * p.f)
    if strict:
        require_admissible(p)
        _floor_check(p.k, 384 / (p.epsilon * p.beta * p.eta), "k")
        _floor_check(s, cg_floor(p), "k/(4f)")
        if s > p.R / 6:
            raise ConstraintError(f"k/(4f)={s:.2f} excede R/6={p.R / 6:.2f}")
    return (
        math.exp(math.log(p.L) - p.omega * p.k)
        + bound_cg(p, s=s, strict=False)
        + bound_ecq(p, s=s, strict=False)
        + bound_cp(p, k=p.k * p.beta * p.eta / 64, strict=False)
    )


# ----------------------------------------------------------------------
# Caudas auxiliares
# ----------------------------------------------------------------------
def chernoff_lower_tail(a: float, n: float, delta: float) -> float:
    """exp(−δ²an/2)."""
    return math.exp(-delta ** 2 * a * n / 2)


def honest_count_tail(a: float, n: float) -> float:
    """2·exp(−a²n/64)."""
    return 2 * math.exp(-a ** 2 * n / 64)


def margin_tail(a: float, n: float, epsilon: float) -> float:
    """(n+1)·exp(−ε²a²n/64)."""
    return (n + 1) * math.exp(-epsilon ** 2 * a ** 2 * n / 64)


# ----------------------------------------------------------------------
# Tabela
# ----------------------------------------------------------------------
def bounds_row(p: BoundParams) -> Dict[str, Any]:
    """Valores (sem checagem estrita) e restrições violadas de um conjunto de parâmetros."""
    row: Dict[str, Any] = dict(p.to_dict())
    row.update({
        "eps_cp": bound_cp(p, strict=False),
        "eps_cg": bound_cg(p, strict=False),
        "eps_ecq": bound_ecq(p, strict=False),
        "eps_cq": bound_cq(p, strict=False),
        "eps_lift": epsilon_lift(p),
        "lift_composite": lift_composite(p),
        "bg_extra": bound_theorem2_extra(p, strict=False),
        "divergence_tail": divergence_tail(p),
        "epoch_cp": epoch_cp(p),
    })
    issues = check_constraints(p)
    row["admissible"] = is_admissible(p)
    row["flags"] = "; ".join(issues)
    if issues:
        logger.warning(f"Linha de limites sinalizada: {row['flags']}")
    return row


def bounds_table(grid: List[BoundParams]) -> List[Dict[str, Any]]:
    return [bounds_row(p) for p in grid]


def expand_grid(base: BoundParams, axis: str, values: List[Any]) -> List[BoundParams]:
    if axis not in BoundParams.__dataclass_fields__:
        raise ValueError(f"Eixo desconhecido: {axis}")
    return [replace(base, **{axis: v}) for v in values]
