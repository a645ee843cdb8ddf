"""Blocos, cadeias, bloco gênese e regras de seleção de cadeia.

Funcionalidades:
- Tipos imutáveis (GenesisBlock, Block, Chain, AdjustRecord, Transaction)
- Serialização JSON canônica (chaves ordenadas) e digest sobre a forma canônica
- Probabilidade de liderança phi e limiar T
- maxvalid-mc (cadeia mais longa) e maxvalid-bg (densidade após o ponto de fork)
- Funcionalidade F_INIT que distribui o bloco gênese
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple
import hashlib
import json
import logging
import math

from .crypto import ro_hash

logger = logging.getLogger(__name__)


class InitError(RuntimeError):
    """F_INIT interrompe a execução (stakeholder inicial ausente ou chave duplicada)."""


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def digest(obj: Any) -> str:
    return ro_hash(canonical_json(obj).encode("utf-8")).hex()


# ----------------------------------------------------------------------
# Tipos
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Stakeholder:
    party: str
    v_vrf: str
    v_kes: str
    stake: int


@dataclass(frozen=True)
class GenesisBlock:
    stakeholders: Tuple[Stakeholder, ...]
    eta_1: str
    t_start: int
    t_round_1: int

    def __post_init__(self):
        ids = [s.party for s in self.stakeholders]
        if len(set(ids)) != len(ids):
            raise ValueError("Ids de stakeholders duplicados no gênese")
        if any(s.stake <= 0 for s in self.stakeholders):
            raise ValueError("Stakes do gênese devem ser positivos")
        if self.t_round_1 <= 0:
            raise ValueError(f"t_round_1 deve ser positivo: {self.t_round_1}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stakeholders": [[s.party, s.v_vrf, s.v_kes, s.stake] for s in self.stakeholders],
            "eta_1": self.eta_1,
            "t_start": self.t_start,
            "t_round_1": self.t_round_1,
        }

    @cached_property
    def hash(self) -> str:
        return digest(self.to_dict())

    def stakes(self) -> Dict[str, int]:
        return {s.party: s.stake for s in self.stakeholders}


@dataclass(frozen=True)
class Transaction:
    """Transferência de stake; sender None é uma anotação sem efeito de saldo."""

    tx_id: str
    sender: Optional[str]
    recipient: Optional[str]
    amount: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {"tx_id": self.tx_id, "sender": self.sender, "recipient": self.recipient, "amount": self.amount}


@dataclass(frozen=True)
class AdjustRecord:
    """Medição (B_last, T_recv, P, y, π) do slot ``sl``."""

    b_last: Optional[str]
    t_recv: Optional[int]
    party: str
    y: int
    pi: str
    sl: int

    def __post_init__(self):
        if (self.b_last is None) != (self.t_recv is None):
            raise ValueError("AdjustRecord: B_last e T_recv devem ser ambos ⊥ ou ambos definidos")

    @property
    def key(self) -> Tuple[str, int]:
        return (self.party, self.sl)

    def to_dict(self) -> Dict[str, Any]:
        return {"b_last": self.b_last, "t_recv": self.t_recv, "party": self.party,
                "y": self.y, "pi": self.pi, "sl": self.sl}


@dataclass(frozen=True)
class Certificate:
    party: str
    y: int
    pi: str


@dataclass(frozen=True)
class Block:
    h: str
    st: Tuple[Transaction, ...]
    sl: int
    t_now: int
    crt: Certificate
    rho: Tuple[int, str]
    a: Tuple[Tuple[AdjustRecord, int], ...] = ()
    sigma: str = ""

    def header_dict(self) -> Dict[str, Any]:
        return {
            "h": self.h,
            "st": [tx.to_dict() for tx in self.st],
            "sl": self.sl,
            "t_now": self.t_now,
            "crt": [self.crt.party, self.crt.y, self.crt.pi],
            "rho": [self.rho[0], self.rho[1]],
            "a": [[rec.to_dict(), t_adj] for rec, t_adj in self.a],
        }

    def header_bytes(self) -> bytes:
        return canonical_json(self.header_dict()).encode("utf-8")

    def to_dict(self) -> Dict[str, Any]:
        data = self.header_dict()
        data["sigma"] = self.sigma
        return data

    @cached_property
    def hash(self) -> str:
        return digest(self.to_dict())

    @property
    def creator(self) -> str:
        return self.crt.party


@dataclass(frozen=True)
class Chain:
    genesis: GenesisBlock
    blocks: Tuple[Block, ...] = ()

    @property
    def length(self) -> int:
        return len(self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def tip_hash(self) -> str:
        return self.blocks[-1].hash if self.blocks else self.genesis.hash

    @property
    def head(self) -> Optional[Block]:
        return self.blocks[-1] if self.blocks else None

    @cached_property
    def slots(self) -> Tuple[int, ...]:
        return tuple(b.sl for b in self.blocks)

    @cached_property
    def index_by_hash(self) -> Dict[str, int]:
        return {b.hash: i for i, b in enumerate(self.blocks)}

    def extend(self, block: Block) -> "Chain":
        return Chain(self.genesis, self.blocks + (block,))

    def prefix(self, n: int) -> "Chain":
        return Chain(self.genesis, self.blocks[:max(0, n)])

    def truncated(self, k: int) -> "Chain":
        """Cadeia sem os últimos k blocos (C^⌈k)."""
        return self.prefix(len(self.blocks) - k)

    def is_prefix_of(self, other: "Chain") -> bool:
        n = len(self.blocks)
        if n > len(other.blocks):
            return False
        if n == 0:
            return self.genesis.hash == other.genesis.hash
        return other.blocks[n - 1].hash == self.blocks[-1].hash

    def common_prefix_length(self, other: "Chain") -> int:
        """Comprimento do prefixo comum (busca binária sobre hashes)."""
        lo, hi = 0, min(len(self.blocks), len(other.blocks))
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.blocks[mid - 1].hash == other.blocks[mid - 1].hash:
                lo = mid
            else:
                hi = mid - 1
        return lo

    def to_dict(self) -> Dict[str, Any]:
        return {"genesis": self.genesis.to_dict(), "blocks": [b.to_dict() for b in self.blocks]}

    def canonical(self) -> str:
        return canonical_json(self.to_dict())

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def summary(self) -> List[Tuple[str, int]]:
        return [(b.creator, b.sl) for b in self.blocks]


@dataclass(frozen=True)
class StakeDistribution:
    stakes: Tuple[Tuple[str, int], ...]

    @classmethod
    def from_mapping(cls, mapping: Dict[str, int]) -> "StakeDistribution":
        return cls(tuple(sorted((p, int(v)) for p, v in mapping.items() if v > 0)))

    @cached_property
    def as_dict(self) -> Dict[str, int]:
        return dict(self.stakes)

    @property
    def total(self) -> int:
        return sum(v for _, v in self.stakes)

    def stake(self, party: str) -> int:
        return self.as_dict.get(party, 0)

    def relative(self, party: str) -> float:
        total = self.total
        return self.stake(party) / total if total else 0.0


# ----------------------------------------------------------------------
# Liderança
# ----------------------------------------------------------------------
def phi(f: float, alpha: float) -> float:
    """phi_f(α) = 1 − (1 − f)^α."""
    if not 0.0 < f <= 1.0:
        raise ValueError(f"Coeficiente f fora de (0, 1]: {f}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"Stake relativo fora de [0, 1]: {alpha}")
    return 1.0 - (1.0 - f) ** alpha


def threshold(f: float, alpha: float, l_vrf: int) -> int:
    """T = floor(2^l_vrf · phi_f(α))."""
    return math.floor((2 ** l_vrf) * phi(f, alpha))


def vrf_input(eta: str, sl: int, tag: bytes) -> bytes:
    return f"{eta}|{sl}|".encode() + tag


# ----------------------------------------------------------------------
# Seleção de cadeia
# ----------------------------------------------------------------------
def maxvalid_mc(c_loc: Chain, candidates: Sequence[Chain]) -> Chain:
    """Cadeia mais longa; empates favorecem C_loc e depois a chegada mais antiga."""
    best = c_loc
    for cand in candidates:
        if len(cand.blocks) > len(best.blocks):
            best = cand
    return best


def _density(chain: Chain, start: int, end: int) -> int:
    """Blocos com slot em [start, end]."""
    return sum(1 for sl in chain.slots if start <= sl <= end)


def maxvalid_bg(c_loc: Chain, candidates: Sequence[Chain], k: int, s: int) -> Chain:
    """Regra longest-chain para forks rasos e de densidade para forks profundos.

    Args:
        c_loc: cadeia local
        candidates: cadeias válidas na ordem de chegada
        k: profundidade máxima de fork tratada pela regra longest-chain
        s: largura da janela de densidade após o ponto de fork
    """
    best = c_loc
    for cand in candidates:
        if cand.tip_hash == best.tip_hash:
            continue
        common = best.common_prefix_length(cand)
        depth = len(best.blocks) - common
        if depth <= k:
            if len(cand.blocks) > len(best.blocks):
                best = cand
            continue
        fork_slot = best.blocks[common - 1].sl if common else 0
        ours = _density(best, fork_slot + 1, fork_slot + s)
        theirs = _density(cand, fork_slot + 1, fork_slot + s)
        logger.debug(f"Fork profundo ({depth} blocos): densidade local={ours} candidata={theirs}")
        if theirs > ours:
            best = cand
    return best


# ----------------------------------------------------------------------
# F_INIT
# ----------------------------------------------------------------------
class InitFunctionality:
    """Coleta as chaves dos stakeholders iniciais e constrói o gênese no tick 0."""

    def __init__(self, initial_stakes: Dict[str, int], t_start: int, t_round_1: int, oracle):
        self.initial_stakes = dict(initial_stakes)
        self.t_start = t_start
        self.t_round_1 = t_round_1
        self.oracle = oracle
        self._keys: Dict[str, Tuple[str, str]] = {}
        self._genesis: Optional[GenesisBlock] = None

    def submit_keys(self, party: str, v_vrf: str, v_kes: str, now: int) -> bool:
        """Registra as chaves de um stakeholder inicial antes do gênese."""
        if now >= 0 or party not in self.initial_stakes:
            return False
        if any(v == v_vrf for p, (v, _) in self._keys.items() if p != party):
            raise InitError(f"Chave VRF duplicada submetida por {party}")
        self._keys[party] = (v_vrf, v_kes)
        return True

    def genesis(self, now: int) -> Optional[GenesisBlock]:
        """Bloco gênese (None antes do tick 0).

        Raises:
            InitError: se algum stakeholder inicial não submeteu chaves
        """
        if now < 0:
            return None
        if self._genesis is None:
            missing = sorted(p for p in self.initial_stakes if p not in self._keys)
            if missing:
                raise InitError(f"Stakeholders iniciais sem chaves no gênese: {', '.join(missing)}")
            holders = tuple(
                Stakeholder(p, self._keys[p][0], self._keys[p][1], int(self.initial_stakes[p]))
                for p in sorted(self.initial_stakes)
            )
            eta_1 = self.oracle.hexdigest(b"eta_1")
            self._genesis = GenesisBlock(holders, eta_1, self.t_start, self.t_round_1)
            logger.info(f"Bloco gênese criado com {len(holders)} stakeholders")
        return self._genesis
