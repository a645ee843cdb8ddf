"""Relógio global autônomo da simulação.

Funcionalidades:
- Fonte de tempo inteira e monotônica (ticks), lida pelas partes e nunca controlada por elas
- Contrato de ritmo do ambiente: ``now`` nunca ultrapassa ``next``
- Round-Update quando todas as partes honestas e funcionalidades registradas reportaram
"""
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Optional
import logging

logger = logging.getLogger(__name__)


class RegistrationError(ValueError):
    """Parte não registrada tentando acessar um recurso."""


class PacingStall(RuntimeError):
    """Tentativa de avançar o relógio com now == next."""


@dataclass(frozen=True)
class ClockState:
    """Fotografia imutável do estado do relógio."""

    now: int
    next: int
    registered_parties: FrozenSet[str] = frozenset()
    registered_functionalities: FrozenSet[str] = frozenset()
    party_flags: Dict[str, int] = field(default_factory=dict)
    party_reports: Dict[str, Optional[int]] = field(default_factory=dict)
    functionality_flags: Dict[str, int] = field(default_factory=dict)


def majority_value(reports: Iterable[Optional[int]]) -> Optional[int]:
    """Valor mais reportado, ignorando ⊥ (None). Empate: menor valor."""
    counts = Counter(v for v in reports if v is not None)
    if not counts:
        return None
    best = max(counts.values())
    return min(v for v, c in counts.items() if c == best)


class AutoClock:
    """Relógio de referência universal com ritmo controlado pelo ambiente."""

    def __init__(self, t_start: int, t_run: int):
        if t_start < 0:
            raise ValueError(f"t_start deve ser não negativo: {t_start}")
        if t_run < 1:
            raise ValueError(f"t_run deve ser positivo: {t_run}")
        self.t_start = t_start
        self.t_run = t_run
        self.now = -t_start
        self.next = 0
        self._parties: Dict[str, bool] = {}  # id -> honesta
        self._functionalities: set = set()
        self._party_flags: Dict[str, int] = {}
        self._party_reports: Dict[str, Optional[int]] = {}
        self._func_flags: Dict[str, int] = {}
        self.round_updates = 0

    # ------------------------------------------------------------------
    # Registro
    # ------------------------------------------------------------------
    def register_party(self, party: str) -> None:
        if party not in self._parties:
            self._parties[party] = True
            self._party_flags[party] = 0
            self._party_reports[party] = None

    def deregister_party(self, party: str) -> None:
        self._parties.pop(party, None)
        self._party_flags.pop(party, None)
        self._party_reports.pop(party, None)
        self._maybe_round_update()

    def is_registered(self, party: str) -> bool:
        return party in self._parties

    def mark_corrupted(self, party: str) -> None:
        """Partes corrompidas deixam de bloquear o Round-Update."""
        if party in self._parties:
            self._parties[party] = False
            self._maybe_round_update()

    def register_functionality(self, fid: str) -> None:
        self._functionalities.add(fid)
        self._func_flags.setdefault(fid, 0)

    def deregister_functionality(self, fid: str) -> None:
        self._functionalities.discard(fid)
        self._func_flags.pop(fid, None)
        self._maybe_round_update()

    # ------------------------------------------------------------------
    # Operações
    # ------------------------------------------------------------------
    def clock_read(self, requester: Optional[str] = None) -> int:
        """Retorna ``now``.

        Args:
            requester: id da parte ou funcionalidade; None para ambiente/adversário

        Raises:
            RegistrationError: se a parte não estiver registrada
        """
        if requester is not None and requester not in self._parties and requester not in self._functionalities:
            raise RegistrationError(f"Parte não registrada no relógio: {requester}")
        return self.now

    def clock_advance(self) -> int:
        """Incrementa ``now`` em exatamente um tick."""
        if self.now >= self.next:
            raise PacingStall(f"Relógio parado: now={self.now} next={self.next}")
        self.now += 1
        return self.now

    def clock_update(self, party: str, t_next: Optional[int]) -> None:
        """Registra o t_next reportado por uma parte (None = ⊥)."""
        if party not in self._parties:
            raise RegistrationError(f"Parte não registrada no relógio: {party}")
        self._party_reports[party] = t_next
        self._party_flags[party] = 1
        self._maybe_round_update()

    def functionality_update(self, fid: str) -> None:
        if fid not in self._functionalities:
            raise RegistrationError(f"Funcionalidade não registrada no relógio: {fid}")
        self._func_flags[fid] = 1
        self._maybe_round_update()

    def force_round_update(self) -> None:
        """Fallback do ambiente quando o relógio está parado sem relatórios completos."""
        logger.debug(f"Round-Update forçado em now={self.now}")
        self._round_update()
        if self.next <= self.now:
            # nenhum relatório utilizável: o ambiente estende o horizonte em um tick
            self.next = self.now + 1

    def snapshot(self) -> ClockState:
        return ClockState(
            now=self.now,
            next=self.next,
            registered_parties=frozenset(self._parties),
            registered_functionalities=frozenset(self._functionalities),
            party_flags=dict(self._party_flags),
            party_reports=dict(self._party_reports),
            functionality_flags=dict(self._func_flags),
        )

    # ------------------------------------------------------------------
    def _maybe_round_update(self) -> None:
        honest = [p for p, ok in self._parties.items() if ok]
        if not honest and not self._functionalities:
            return
        if all(self._party_flags.get(p) for p in honest) and all(
            self._func_flags.get(f) for f in self._functionalities
        ):
            self._round_update()

    def _round_update(self) -> None:
        honest = [p for p, ok in self._parties.items() if ok]
        value = majority_value(self._party_reports.get(p) for p in honest)
        if value is not None:
            # next nunca recua abaixo de now
            self.next = max(self.now, value + self.t_run)
        for p in self._party_flags:
            self._party_flags[p] = 0
            self._party_reports[p] = None
        for f in self._func_flags:
            self._func_flags[f] = 0
        self.round_updates += 1
