"""Rede de difusão com razão de entrega (F_N-MC).

Funcionalidades:
- Multicast honesto: cada cópia recebe rd=0 com probabilidade η, senão rd=1
- Multicast adversarial parcial com rd e prazos escolhidos pelo adversário
- Atrasos, troca de flags (mix) e reordenação controlados pelo adversário
- Regra de liberação: rd=0 vencido vira rd=2 no prazo; rd=1 não tocado vira rd=3
  com atraso de dois rounds mais um tick

Estados rd:
    0 - no prazo, ainda não definido
    1 - com perdas, ainda não definido
    2 - no prazo, definido (entregável)
    3 - atrasado, definido (entregável quando D_mid chega)
"""
from dataclasses import dataclass, field
from itertools import count
from typing import Any, Callable, Dict, List, Optional, Tuple
import logging

import numpy as np

logger = logging.getLogger(__name__)

RD_ON_TIME = 0
RD_LOSSY = 1
RD_ON_TIME_SET = 2
RD_DELAYED_SET = 3

# Sobrescrita opcional do sorteio de rd para cenários roteirizados
DrawOverride = Callable[[str, str, Any], Optional[int]]
TraceHook = Callable[[Dict[str, Any]], None]


@dataclass
class NetMessage:
    """Cópia de uma mensagem em trânsito para um destinatário."""

    payload: Any
    mid: int
    d: int
    d_max: int
    recipient: str
    rd: int
    sender: Optional[str] = None
    honest: bool = True
    seq: int = 0
    touched: bool = False
    sent_at: int = 0


@dataclass(frozen=True)
class Leak:
    """Vazamento de uma cópia para o adversário."""

    network: str
    mid: int
    recipient: str
    rd: int
    sender: Optional[str]
    payload: Any
    d: int
    d_max: int
    honest: bool


@dataclass
class DeliveryStats:
    """Contagem de cópias honestas por tick de envio."""

    sent: Dict[int, int] = field(default_factory=dict)
    on_time: Dict[int, int] = field(default_factory=dict)

    def record(self, tick: int, on_time: bool) -> None:
        self.sent[tick] = self.sent.get(tick, 0) + 1
        if on_time:
            self.on_time[tick] = self.on_time.get(tick, 0) + 1

    def ratio(self, start: int, end: int) -> Optional[float]:
        """Razão rd=0 das cópias enviadas em [start, end)."""
        total = sum(n for t, n in self.sent.items() if start <= t < end)
        if total == 0:
            return None
        good = sum(n for t, n in self.on_time.items() if start <= t < end)
        return good / total

    def totals(self) -> Tuple[int, int]:
        return sum(self.sent.values()), sum(self.on_time.values())


class DiffusionNetwork:
    """Instância da rede de difusão (bc, tx ou adj)."""

    def __init__(self, name: str, eta: float, seed: int, clock=None,
                 trace: Optional[TraceHook] = None,
                 draw_override: Optional[DrawOverride] = None):
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"η deve estar em [0, 1]: {eta}")
        self.name = name
        self.eta = eta
        self.rng = np.random.default_rng(seed)
        self.clock = clock
        self.trace = trace
        self.draw_override = draw_override
        self.round_length = 1
        self.parties: List[str] = []
        self._mids = count(1)
        self._seq = count(1)
        self._by_mid: Dict[int, NetMessage] = {}
        self._inbox: Dict[str, List[NetMessage]] = {}
        self._unset: List[NetMessage] = []
        self._leaks: List[Leak] = []
        self.stats = DeliveryStats()

    # ------------------------------------------------------------------
    def register(self, party: str) -> None:
        if party not in self.parties:
            self.parties.append(party)
            self._inbox.setdefault(party, [])

    def deregister(self, party: str) -> None:
        if party in self.parties:
            self.parties.remove(party)

    def is_registered(self, party: str) -> bool:
        return party in self.parties

    def _now(self) -> int:
        return self.clock.clock_read() if self.clock is not None else 0

    def _emit(self, event: str, msg: NetMessage, **extra) -> None:
        if self.trace is not None:
            record = {"event": event, "net": self.name, "mid": msg.mid, "rd": msg.rd,
                      "recipient": msg.recipient, "d": msg.d}
            record.update(extra)
            self.trace(record)

    def _enqueue(self, payload: Any, sender: Optional[str], recipient: str, rd: int,
                 d: int, d_max: int, honest: bool) -> NetMessage:
        msg = NetMessage(payload=payload, mid=next(self._mids), d=d, d_max=d_max,
                         recipient=recipient, rd=rd, sender=sender, honest=honest,
                         seq=next(self._seq), sent_at=d)
        self._by_mid[msg.mid] = msg
        self._inbox.setdefault(recipient, []).append(msg)
        if rd in (RD_ON_TIME, RD_LOSSY):
            self._unset.append(msg)
        self._leaks.append(Leak(self.name, msg.mid, recipient, rd, sender, payload, d, d_max, honest))
        self._emit("enqueue", msg, sender=sender)
        return msg

    def draw_rd(self) -> int:
        """Sorteia rd de uma cópia: 0 com probabilidade η."""
        return RD_ON_TIME if self.rng.random() < self.eta else RD_LOSSY

    # ------------------------------------------------------------------
    # Operações
    # ------------------------------------------------------------------
    def honest_multicast(self, sender: str, payload: Any, t_next: int) -> List[Tuple[str, int, int]]:
        """Envia uma cópia para cada parte registrada, exceto o remetente.

        Returns:
            Lista (destinatário, mid, rd) entregue ao adversário como vazamento
        """
        if sender not in self.parties:
            raise ValueError(f"Remetente não registrado na rede {self.name}: {sender}")
        now = self._now()
        out = []
        for recipient in self.parties:
            if recipient == sender:
                continue
            rd = None
            if self.draw_override is not None:
                rd = self.draw_override(sender, recipient, payload)
            if rd is None:
                rd = self.draw_rd()
            msg = self._enqueue(payload, sender, recipient, rd, now, t_next, honest=True)
            self.stats.record(now, rd == RD_ON_TIME)
            out.append((recipient, msg.mid, rd))
        return out

    def adversarial_multicast(self, targets: List[Tuple[Any, str, int, int]],
                              sender: Optional[str] = None) -> List[Tuple[str, int, int]]:
        """Multicast parcial com rd e prazo escolhidos pelo adversário."""
        now = self._now()
        out = []
        for payload, recipient, rd, t_next in targets:
            if recipient not in self.parties:
                logger.debug(f"Destinatário fora da rede {self.name} ignorado: {recipient}")
                continue
            msg = self._enqueue(payload, sender, recipient, rd, now, t_next, honest=False)
            out.append((recipient, msg.mid, rd))
        return out

    def set_delays(self, pairs: List[Tuple[int, int]]) -> None:
        """Aplica atrasos (T_mid, mid); pares inválidos são ignorados."""
        for delta, mid in pairs:
            msg = self._by_mid.get(mid)
            if msg is None or delta < 0:
                continue
            if msg.rd == RD_LOSSY:
                msg.d += delta
                msg.rd = RD_DELAYED_SET
                msg.touched = True
                self._emit("delay", msg, delta=delta)
            elif msg.rd == RD_ON_TIME:
                if msg.d + delta <= msg.d_max:
                    msg.d += delta
                    msg.rd = RD_ON_TIME_SET
                    msg.touched = True
                    self._emit("delay", msg, delta=delta)

    def mix(self, mid: int, mid2: int) -> None:
        a = self._by_mid.get(mid)
        b = self._by_mid.get(mid2)
        if a is None or b is None:
            return
        if a.rd not in (RD_ON_TIME, RD_LOSSY) or b.rd not in (RD_ON_TIME, RD_LOSSY):
            return
        a.rd, b.rd = b.rd, a.rd

    def swap_order(self, mid: int, mid2: int) -> None:
        a = self._by_mid.get(mid)
        b = self._by_mid.get(mid2)
        if a is None or b is None or a is b:
            return
        a.seq, b.seq = b.seq, a.seq

    def fetch(self, party: str, now: int) -> List[Tuple[Any, int]]:
        """Entrega e remove as cópias com rd ∈ {2,3} e D_mid ≤ now, na ordem da fila."""
        inbox = self._inbox.get(party)
        if not inbox:
            return []
        ready = [m for m in inbox if m.rd in (RD_ON_TIME_SET, RD_DELAYED_SET) and m.d <= now]
        if not ready:
            return []
        keep = [m for m in inbox if not (m.rd in (RD_ON_TIME_SET, RD_DELAYED_SET) and m.d <= now)]
        self._inbox[party] = keep
        ready.sort(key=lambda m: m.seq)
        for m in ready:
            self._by_mid.pop(m.mid, None)
            self._emit("fetch", m)
        return [(m.payload, m.d) for m in ready]

    # ------------------------------------------------------------------
    # Regra de liberação
    # ------------------------------------------------------------------
    def drain_leaks(self) -> List[Leak]:
        leaks, self._leaks = self._leaks, []
        return leaks

    def release_due(self, now: int) -> int:
        """Promove rd=0 com prazo vencido para rd=2 (D_mid inalterado)."""
        promoted = 0
        remaining = []
        for msg in self._unset:
            if msg.rd == RD_ON_TIME and msg.d_max <= now:
                msg.rd = RD_ON_TIME_SET
                promoted += 1
                self._emit("auto_promote", msg)
            elif msg.rd in (RD_ON_TIME, RD_LOSSY):
                remaining.append(msg)
        self._unset = remaining
        return promoted

    def release_untouched(self, now: int) -> int:
        """Promove rd=1 não tocado pelo adversário para rd=3 com atraso de dois rounds."""
        promoted = 0
        remaining = []
        for msg in self._unset:
            if msg.rd == RD_LOSSY and not msg.touched:
                msg.rd = RD_DELAYED_SET
                msg.d += 2 * self.round_length + 1
                promoted += 1
                self._emit("auto_promote", msg)
            elif msg.rd in (RD_ON_TIME, RD_LOSSY):
                remaining.append(msg)
        self._unset = remaining
        return promoted

    def message(self, mid: int) -> Optional[NetMessage]:
        return self._by_mid.get(mid)

    def pending(self, party: Optional[str] = None) -> List[NetMessage]:
        if party is not None:
            return sorted(self._inbox.get(party, []), key=lambda m: m.seq)
        return sorted(self._by_mid.values(), key=lambda m: m.seq)
