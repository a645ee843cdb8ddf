"""Leitura e validação de cenários e de parâmetros de limites.

Funcionalidades:
- Leitura de arquivos JSON com detecção de encoding (chardet)
- Cenário completo com valores padrão derivados de t_round_1
- Validação campo a campo com ``ConfigError`` nomeando o campo
- Serialização canônica (chaves ordenadas) para relatórios reproduzíveis
"""
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import json
import logging

try:
    import chardet
except ImportError:
    chardet = None

from .adversary import STRATEGIES, WrapperConstraints
from .bounds import GATES, BoundParams
from .party import ProtocolParams

logger = logging.getLogger(__name__)

AVAILABILITY_ACTIONS = ("join", "leave", "stall", "unstall", "offline", "online", "clock_off", "clock_on")
ACTIVATION_ORDERS = ("ascending", "shuffle")
SELECTION_RULES = ("bg", "mc")


class ConfigError(ValueError):
    """Cenário ou arquivo de parâmetros inválido."""


def read_text(path: Union[str, Path]) -> str:
    """Lê um arquivo de texto detectando o encoding.

    Raises:
        ConfigError: se o arquivo não existir
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Arquivo não encontrado: {path}")
    raw = path.read_bytes()
    if chardet:
        enc = chardet.detect(raw).get("encoding") or "utf-8"
        try:
            return raw.decode(enc, errors="replace")
        except LookupError:
            return raw.decode("utf-8", errors="replace")
    return raw.decode("utf-8", errors="replace")


def read_json(path: Union[str, Path]) -> Any:
    text = read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON inválido em {path}: {e}") from e


# ----------------------------------------------------------------------
# Seções do cenário
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class AvailabilityEvent:
    tick: int
    party: str
    action: str


@dataclass(frozen=True)
class TransactionEvent:
    tick: int
    party: str
    tx_id: str
    sender: Optional[str]
    recipient: Optional[str]
    amount: int = 0


@dataclass(frozen=True)
class CorruptionSchedule:
    tick: int
    party: str


@dataclass(frozen=True)
class CheckParams:
    """Parâmetros dos verificadores; τ e μ nulos assumem βfη/16 e εβfη/16."""

    enabled: bool = True
    k: Optional[int] = None
    s: Optional[int] = None
    tau: Optional[float] = None
    mu: Optional[float] = None


@dataclass(frozen=True)
class WrapperParams:
    """Gate do wrapper; ``eta`` nulo usa o η da rede como limite inferior."""

    enabled: bool = False
    eta: Optional[float] = None
    min_copies: int = 200
    sigmas: float = 3.0


def _require(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"Campo '{name}': {message}")


def _int(data: Dict[str, Any], name: str, default: Any = None, minimum: Optional[int] = None) -> Any:
    value = data.get(name, default)
    if value is None:
        return None
    _require(isinstance(value, int) and not isinstance(value, bool), name, f"inteiro esperado, recebido {value!r}")
    if minimum is not None:
        _require(value >= minimum, name, f"deve ser ≥ {minimum}, recebido {value}")
    return value


def _float(data: Dict[str, Any], name: str, default: Any = None, lo: float = 0.0, hi: float = 1.0) -> Any:
    value = data.get(name, default)
    if value is None:
        return None
    _require(isinstance(value, (int, float)) and not isinstance(value, bool), name,
             f"número esperado, recebido {value!r}")
    _require(lo <= value <= hi, name, f"fora de [{lo}, {hi}]: {value}")
    return float(value)


@dataclass(frozen=True)
class Scenario:
    """Cenário de execução: partes, parâmetros de protocolo, adversário e agenda."""

    seed: int = 0
    n_parties: int = 4
    stakes: Dict[str, int] = field(default_factory=dict)
    f: float = 0.5
    eta: float = 1.0
    t_round_1: int = 10
    t_start: int = 10
    t_run: Optional[int] = None
    pre_wait: Optional[int] = None
    R: int = 10
    L: int = 100
    l_vrf: int = 32
    k: int = 10
    s: int = 10
    omega1: float = 0.3
    omega2: float = 0.1
    t_round_min: Optional[int] = None
    t_round_max: Optional[int] = None
    reject_empty_epochs: bool = True
    selection: str = "bg"
    alpha: float = 1.0
    beta: float = 1.0
    epsilon: float = 0.1
    gate: str = "delay"
    adversary: str = "passive"
    corrupted: List[str] = field(default_factory=list)
    corruption_schedule: List[CorruptionSchedule] = field(default_factory=list)
    availability: List[AvailabilityEvent] = field(default_factory=list)
    transactions: List[TransactionEvent] = field(default_factory=list)
    checks: CheckParams = field(default_factory=CheckParams)
    wrapper: WrapperParams = field(default_factory=WrapperParams)
    activation: str = "ascending"
    trace: bool = True
    max_ticks: Optional[int] = None

    # ------------------------------------------------------------------
    @property
    def party_ids(self) -> List[str]:
        return [f"P{i}" for i in range(1, self.n_parties + 1)]

    @property
    def late_joiners(self) -> List[str]:
        joins = {ev.party for ev in self.availability if ev.action == "join"}
        return [p for p in self.party_ids if p in joins]

    @property
    def initial_stakes(self) -> Dict[str, int]:
        late = set(self.late_joiners)
        # stake zero fica fora do gênese
        return {p: self.stakes.get(p, 1) for p in self.party_ids
                if p not in late and self.stakes.get(p, 1) > 0}

    @property
    def resolved_t_run(self) -> int:
        return self.t_run if self.t_run is not None else max(1, round(0.4 * self.t_round_1))

    @property
    def resolved_pre_wait(self) -> int:
        return self.pre_wait if self.pre_wait is not None else self.resolved_t_run // 2

    @property
    def tick_cap(self) -> int:
        if self.max_ticks is not None:
            return self.max_ticks
        t_max = self.protocol_params().t_round_max
        return self.t_start + (self.L + 3 * self.R) * t_max + 6 * self.t_round_1

    def protocol_params(self) -> ProtocolParams:
        t_run = self.resolved_t_run
        return ProtocolParams(
            R=self.R, f=self.f, L=self.L, t_round_1=self.t_round_1, t_run=t_run,
            t_start=self.t_start, pre_wait=self.resolved_pre_wait, l_vrf=self.l_vrf,
            k=self.k, s=self.s, omega1=self.omega1, omega2=self.omega2,
            t_round_min=self.t_round_min if self.t_round_min is not None else t_run + 1,
            t_round_max=self.t_round_max if self.t_round_max is not None else 8 * self.t_round_1,
            reject_empty_epochs=self.reject_empty_epochs, selection=self.selection,
        )

    def constraints(self) -> WrapperConstraints:
        eta = self.wrapper.eta if self.wrapper.eta is not None else self.eta
        return WrapperConstraints(alpha=self.alpha, beta=self.beta, eta=eta, epsilon=self.epsilon, f=self.f)

    def check_k(self) -> int:
        return self.checks.k if self.checks.k is not None else self.k

    def check_s(self) -> int:
        return self.checks.s if self.checks.s is not None else self.s

    def check_tau(self) -> float:
        if self.checks.tau is not None:
            return self.checks.tau
        return self.beta * self.f * self.eta / 16

    def check_mu(self) -> float:
        if self.checks.mu is not None:
            return self.checks.mu
        return self.epsilon * self.beta * self.f * self.eta / 16

    def bound_params(self, Q: int) -> BoundParams:
        return BoundParams(
            f=self.f, eta=self.eta, alpha=self.alpha, beta=self.beta, epsilon=self.epsilon,
            R=self.R, L=self.L, Q=max(1, Q), k=self.check_k(), s=self.check_s(),
            tau_cg=self.check_tau(), mu=self.check_mu(), l_vrf=self.l_vrf, gate=self.gate,
        )

    def with_value(self, axis: str, value: Any) -> "Scenario":
        """Cópia do cenário com um campo substituído (revalidada)."""
        data = self.to_dict()
        if axis not in data:
            raise ConfigError(f"Eixo desconhecido: {axis}")
        data[axis] = value
        return Scenario.from_dict(data)

    # ------------------------------------------------------------------
    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Scenario":
        """Valida e constrói o cenário.

        Raises:
            ConfigError: campo inválido, desconhecido ou inconsistente
        """
        if not isinstance(data, dict):
            raise ConfigError("O cenário deve ser um objeto JSON")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Campos desconhecidos no cenário: {', '.join(unknown)}")

        n = _int(data, "n_parties", 4, minimum=1)
        ids = [f"P{i}" for i in range(1, n + 1)]
        stakes = data.get("stakes", {})
        if isinstance(stakes, list):
            _require(len(stakes) == n, "stakes", f"{n} valores esperados, recebidos {len(stakes)}")
            stakes = dict(zip(ids, stakes))
        _require(isinstance(stakes, dict), "stakes", "objeto ou lista esperado")
        for pid, value in stakes.items():
            _require(pid in ids, "stakes", f"parte inexistente: {pid}")
            _require(isinstance(value, int) and value >= 0, "stakes", f"stake inválido para {pid}: {value!r}")

        t_round_1 = _int(data, "t_round_1", 10, minimum=2)
        t_run = _int(data, "t_run", None, minimum=1)
        if t_run is not None:
            _require(t_run < t_round_1, "t_run", f"deve ser menor que t_round_1={t_round_1}")
        R = _int(data, "R", 10, minimum=2)
        L = _int(data, "L", 100, minimum=1)
        _require(L >= R, "L", f"deve ser ≥ R={R}")

        selection = data.get("selection", "bg")
        _require(selection in SELECTION_RULES, "selection", f"opções: {', '.join(SELECTION_RULES)}")
        gate = data.get("gate", "delay")
        _require(gate in GATES, "gate", f"opções: {', '.join(GATES)}")
        adversary = data.get("adversary", "passive")
        _require(adversary in STRATEGIES, "adversary", f"opções: {', '.join(STRATEGIES)}")
        activation = data.get("activation", "ascending")
        _require(activation in ACTIVATION_ORDERS, "activation", f"opções: {', '.join(ACTIVATION_ORDERS)}")

        corrupted = list(data.get("corrupted", []))
        for pid in corrupted:
            _require(pid in ids, "corrupted", f"parte inexistente: {pid}")
        schedule = [CorruptionSchedule(**_event(ev, "corruption_schedule", ("tick", "party"), ids))
                    for ev in data.get("corruption_schedule", [])]
        availability = []
        for ev in data.get("availability", []):
            item = _event(ev, "availability", ("tick", "party", "action"), ids)
            _require(item["action"] in AVAILABILITY_ACTIONS, "availability",
                     f"ação desconhecida {item['action']!r} (opções: {', '.join(AVAILABILITY_ACTIONS)})")
            availability.append(AvailabilityEvent(**item))
        transactions = []
        for ev in data.get("transactions", []):
            item = _event(ev, "transactions", ("tick", "party", "tx_id", "sender", "recipient", "amount"), ids,
                          optional=("sender", "recipient", "amount"))
            _require(isinstance(item.get("amount", 0), int) and item.get("amount", 0) >= 0,
                     "transactions", f"valor inválido em {item['tx_id']}")
            transactions.append(TransactionEvent(**item))

        checks = data.get("checks", {})
        _require(isinstance(checks, dict), "checks", "objeto esperado")
        check_params = CheckParams(
            enabled=bool(checks.get("enabled", True)),
            k=_int(checks, "k", None, minimum=1),
            s=_int(checks, "s", None, minimum=1),
            tau=_float(checks, "tau", None),
            mu=_float(checks, "mu", None),
        )
        wrapper = data.get("wrapper", {})
        _require(isinstance(wrapper, dict), "wrapper", "objeto esperado")
        wrapper_params = WrapperParams(
            enabled=bool(wrapper.get("enabled", False)),
            eta=_float(wrapper, "eta", None),
            min_copies=_int(wrapper, "min_copies", 200, minimum=1),
            sigmas=_float(wrapper, "sigmas", 3.0, lo=0.0, hi=10.0),
        )

        scenario = cls(
            seed=_int(data, "seed", 0, minimum=0),
            n_parties=n,
            stakes=dict(stakes),
            f=_float(data, "f", 0.5),
            eta=_float(data, "eta", 1.0),
            t_round_1=t_round_1,
            t_start=_int(data, "t_start", 10, minimum=1),
            t_run=t_run,
            pre_wait=_int(data, "pre_wait", None, minimum=0),
            R=R,
            L=L,
            l_vrf=_int(data, "l_vrf", 32, minimum=1),
            k=_int(data, "k", 10, minimum=1),
            s=_int(data, "s", 10, minimum=1),
            omega1=_float(data, "omega1", 0.3),
            omega2=_float(data, "omega2", 0.1),
            t_round_min=_int(data, "t_round_min", None, minimum=2),
            t_round_max=_int(data, "t_round_max", None, minimum=2),
            reject_empty_epochs=bool(data.get("reject_empty_epochs", True)),
            selection=selection,
            alpha=_float(data, "alpha", 1.0),
            beta=_float(data, "beta", 1.0),
            epsilon=_float(data, "epsilon", 0.1, lo=1e-9, hi=1 - 1e-9),
            gate=gate,
            adversary=adversary,
            corrupted=corrupted,
            corruption_schedule=schedule,
            availability=availability,
            transactions=transactions,
            checks=check_params,
            wrapper=wrapper_params,
            activation=activation,
            trace=bool(data.get("trace", True)),
            max_ticks=_int(data, "max_ticks", None, minimum=1),
        )
        _require(scenario.f > 0, "f", "deve ser positivo")
        _require(sum(scenario.initial_stakes.values()) > 0, "stakes", "stake inicial total deve ser positivo")
        if scenario.wrapper.enabled and not scenario.constraints().is_admissible():
            raise ConfigError("Campo 'wrapper': α(1−f)²η > (1+ε)/2 não vale para o cenário")
        try:
            scenario.protocol_params()
        except ValueError as e:
            raise ConfigError(f"Parâmetros de protocolo inválidos: {e}") from e
        return scenario

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in ("corruption_schedule", "availability", "transactions"):
                value = [dict(vars(ev)) for ev in value]
            elif f.name in ("checks", "wrapper"):
                value = dict(vars(value))
            elif f.name == "corrupted":
                value = list(value)
            elif f.name == "stakes":
                value = dict(sorted(value.items()))
            data[f.name] = value
        return data

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)


def _event(ev: Any, section: str, keys: tuple, ids: List[str], optional: tuple = ()) -> Dict[str, Any]:
    _require(isinstance(ev, dict), section, f"evento deve ser objeto: {ev!r}")
    unknown = sorted(set(ev) - set(keys))
    _require(not unknown, section, f"chaves desconhecidas: {', '.join(unknown)}")
    missing = [k for k in keys if k not in ev and k not in optional]
    _require(not missing, section, f"chaves ausentes: {', '.join(missing)}")
    _require(isinstance(ev["tick"], int), section, f"tick inteiro esperado: {ev['tick']!r}")
    _require(ev["party"] in ids, section, f"parte inexistente: {ev['party']}")
    return dict(ev)


def load_scenario(path: Union[str, Path], seed: Optional[int] = None) -> Scenario:
    """Carrega um cenário; ``seed`` substitui o valor do arquivo."""
    scenario = Scenario.from_dict(read_json(path))
    if seed is not None:
        scenario = replace(scenario, seed=seed)
    logger.info(f"Cenário carregado de {path}: {scenario.n_parties} partes, L={scenario.L}, seed={scenario.seed}")
    return scenario


def load_params(path: Union[str, Path]) -> List[BoundParams]:
    """Lê uma grade de parâmetros de limites (objeto único ou lista)."""
    data = read_json(path)
    rows = data if isinstance(data, list) else [data]
    grid = []
    for i, row in enumerate(rows):
        if not isinstance(row, dict):
            raise ConfigError(f"Linha {i} de parâmetros deve ser objeto")
        try:
            grid.append(BoundParams.from_dict(row))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Linha {i} de parâmetros inválida: {e}") from e
    return grid
