"""Estratégias adversariais e restrições do wrapper.

Funcionalidades:
- Estratégias: passiva, atraso máximo, delay-attack, fork privado e roteirizada
- Comandos de rede (atraso, mix, reordenação, multicast adversarial)
- Ganchos de comportamento para partes corrompidas
- Predicado de admissibilidade α(1−f)²η > (1+ε)/2 e verificação por round
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple
import logging

from .chain import Chain
from .network import RD_LOSSY, RD_ON_TIME, RD_ON_TIME_SET, Leak
from .party import Party, PartyBehavior

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NetworkCommand:
    """Comando do adversário para uma instância de rede.

    kind:
        delay     - args = lista de (T_mid, mid)
        mix       - args = (mid, mid2)
        swap      - args = (mid, mid2)
        multicast - args = (lista de (payload, destinatário, rd, t_next), remetente)
    """

    kind: str
    network: str
    args: Tuple[Any, ...] = ()


def apply_commands(commands: List[NetworkCommand], networks: Dict[str, Any]) -> int:
    """Aplica comandos nas redes; comandos inválidos são ignorados."""
    applied = 0
    for cmd in commands:
        net = networks.get(cmd.network)
        if net is None:
            logger.debug(f"Comando para rede inexistente ignorado: {cmd.network}")
            continue
        if cmd.kind == "delay":
            net.set_delays(list(cmd.args[0]))
        elif cmd.kind == "mix":
            net.mix(*cmd.args)
        elif cmd.kind == "swap":
            net.swap_order(*cmd.args)
        elif cmd.kind == "multicast":
            targets, sender = cmd.args
            net.adversarial_multicast(list(targets), sender=sender)
        else:
            logger.warning(f"Comando adversarial desconhecido: {cmd.kind}")
            continue
        applied += 1
    return applied


class AdversaryStrategy:
    """Estratégia passiva: não interfere na rede e não altera partes corrompidas."""

    name = "passive"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def on_leak(self, leak: Leak) -> List[NetworkCommand]:
        return []

    def after_tick(self, now: int, networks: Dict[str, Any]) -> List[NetworkCommand]:
        return []

    def behavior(self) -> PartyBehavior:
        return PartyBehavior()


PassiveAdversary = AdversaryStrategy


class AdversarialPublish(PartyBehavior):
    """Publicação via multicast adversarial com rd sorteado pela própria rede."""

    name = "adversarial"

    def publish(self, party: Party, chain: Chain) -> None:
        net = party.ctx.networks["bc"]
        targets = [(chain, p, net.draw_rd(), party.t_next) for p in net.parties if p != party.id]
        net.adversarial_multicast(targets, sender=party.id)


class MaxDelayAdversary(AdversaryStrategy):
    """Empurra cada cópia honesta rd=0 até o prazo e cada rd=1 além de dois rounds."""

    name = "max-delay"

    def __init__(self, seed: int = 0, round_length: int = 1):
        super().__init__(seed)
        self.round_length = round_length

    def on_leak(self, leak: Leak) -> List[NetworkCommand]:
        if not leak.honest:
            return []
        if leak.rd == RD_ON_TIME:
            delta = leak.d_max - leak.d
            if delta <= 0:
                return []
        elif leak.rd == RD_LOSSY:
            delta = 2 * self.round_length + 2
        else:
            return []
        return [NetworkCommand("delay", leak.network, ([(delta, leak.mid)],))]

    def after_tick(self, now: int, networks: Dict[str, Any]) -> List[NetworkCommand]:
        bc = networks.get("bc")
        if bc is not None:
            self.round_length = bc.round_length
        return []


class DelayAttackBehavior(AdversarialPublish):
    """Líder corrompido finge não ter recebido o bloco do slot anterior e forja no fim de t_run."""

    name = "delay-attack"

    def parent_chain(self, party: Party, chain: Chain) -> Chain:
        n = len(chain.blocks)
        while n > 0 and chain.blocks[n - 1].sl >= party.sl - 1:
            n -= 1
        return chain.prefix(n)

    def ready_to_forge(self, party: Party, now: int) -> bool:
        return now >= party.t_begin + party.t_run - 1


class DelayAttackAdversary(AdversaryStrategy):
    name = "delay-attack"

    def behavior(self) -> PartyBehavior:
        return DelayAttackBehavior()


class PrivateForkBehavior(PartyBehavior):
    """Líderes corrompidos estendem uma cadeia privada compartilhada e retêm os blocos."""

    name = "private-fork"

    def __init__(self, strategy: "PrivateForkAdversary"):
        self.strategy = strategy

    def parent_chain(self, party: Party, chain: Chain) -> Chain:
        private = self.strategy.private
        if private is not None and len(private) >= len(chain):
            return private
        return chain

    def ready_to_forge(self, party: Party, now: int) -> bool:
        return True

    def publish(self, party: Party, chain: Chain) -> None:
        private = self.strategy.private
        if private is None or len(chain) > len(private):
            self.strategy.private = chain


class PrivateForkAdversary(AdversaryStrategy):
    """Libera a cadeia privada quando ela supera a maior cadeia honesta vista."""

    name = "private-fork"

    def __init__(self, seed: int = 0):
        super().__init__(seed)
        self.private: Optional[Chain] = None
        self.public_best = 0
        self.releases = 0
        self._released_tip: Optional[str] = None

    def behavior(self) -> PartyBehavior:
        return PrivateForkBehavior(self)

    def on_leak(self, leak: Leak) -> List[NetworkCommand]:
        if leak.network == "bc" and leak.honest and isinstance(leak.payload, Chain):
            self.public_best = max(self.public_best, len(leak.payload))
        return []

    def after_tick(self, now: int, networks: Dict[str, Any]) -> List[NetworkCommand]:
        private = self.private
        if private is None or private.tip_hash == self._released_tip:
            return []
        if len(private) <= self.public_best:
            return []
        bc = networks["bc"]
        targets = tuple((private, p, RD_ON_TIME_SET, now) for p in bc.parties)
        self._released_tip = private.tip_hash
        self.releases += 1
        self.public_best = len(private)
        logger.debug(f"Fork privado liberado com {len(private)} blocos em now={now}")
        return [NetworkCommand("multicast", "bc", (targets, None))]


class ScriptedAdversary(AdversaryStrategy):
    """Atrasos fixos por (remetente, destinatário, slot do bloco) em cenários roteirizados."""

    name = "scripted"

    def __init__(self, delays: Optional[Dict[Tuple[str, str, int], int]] = None, seed: int = 0):
        super().__init__(seed)
        self.delays = dict(delays or {})

    def on_leak(self, leak: Leak) -> List[NetworkCommand]:
        if leak.network != "bc" or not isinstance(leak.payload, Chain) or leak.payload.head is None:
            return []
        head = leak.payload.head
        delta = self.delays.get((head.creator, leak.recipient, head.sl))
        if delta is None:
            return []
        return [NetworkCommand("delay", "bc", ([(delta, leak.mid)],))]


STRATEGIES = {
    "passive": AdversaryStrategy,
    "max-delay": MaxDelayAdversary,
    "delay-attack": DelayAttackAdversary,
    "private-fork": PrivateForkAdversary,
}


def build_strategy(name: str, seed: int = 0) -> AdversaryStrategy:
    try:
        cls = STRATEGIES[name]
    except KeyError:
        raise ValueError(f"Estratégia adversarial desconhecida: {name}") from None
    return cls(seed=seed)


# ----------------------------------------------------------------------
# Wrapper
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class WrapperConstraints:
    alpha: float
    beta: float
    eta: float
    epsilon: float
    f: float

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"ε deve estar em (0, 1): {self.epsilon}")

    def is_admissible(self) -> bool:
        """α(1−f)²η > (1+ε)/2."""
        return self.alpha * (1 - self.f) ** 2 * self.eta > (1 + self.epsilon) / 2


@dataclass(frozen=True)
class AdmissibilitySnapshot:
    """Frações observadas no round: stake alerta, stake participante e razão de entrega."""

    alert_ratio: float
    participation: float
    delivery_ratio: Optional[float] = None
    details: Dict[str, Any] = field(default_factory=dict)


def check_admissibility(snapshot: AdmissibilitySnapshot, constraints: WrapperConstraints) -> bool:
    """Verdadeiro quando o round respeita os limites do wrapper."""
    if snapshot.alert_ratio < constraints.alpha:
        return False
    if snapshot.participation < constraints.beta:
        return False
    if snapshot.delivery_ratio is not None and snapshot.delivery_ratio < constraints.eta:
        return False
    margin = snapshot.alert_ratio * (1 - constraints.f) ** 2 * constraints.eta
    return margin > (1 + constraints.epsilon) / 2


@dataclass(frozen=True)
class CorruptionEvent:
    tick: int
    party: str
