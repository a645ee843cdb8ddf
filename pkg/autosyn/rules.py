"""Regras derivadas da cadeia: distribuição de stake, nonce, duração de round e validação.

Todas as funções são puras na cadeia (prefixo relevante) e memorizadas pelo hash
do último bloco do prefixo, de modo que partes com o mesmo prefixo obtêm os
mesmos valores sem recomputar.

Estratégia:
1. Épocas de R slots; slot sl pertence à época ceil(sl/R)
2. Distribuição da época ep = saldos no fim da época ep−2 (gênese para ep ≤ 2)
3. Nonce η_ep = H(η_{ep−1} | ep | y_ρ dos blocos nos primeiros 2R/3 slots de ep−1)
4. Duração de round da época ep ajustada pelos AdjustRecords das janelas anteriores
5. IsValidChain valida apenas o sufixo além do maior prefixo já validado
"""
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple
import logging
import math

from .chain import (
    AdjustRecord, Block, Chain, GenesisBlock, StakeDistribution, Transaction,
    maxvalid_bg, maxvalid_mc, threshold, vrf_input,
)
from .crypto import NONCE, TEST

logger = logging.getLogger(__name__)

REASONS = (
    "future", "empty_epoch", "bad_genesis", "invalid_state", "badhash", "badslot",
    "badvrf", "badnonce", "badsig", "badadj", "bad_time_interval",
)


class ChainTooShortError(ValueError):
    """A cadeia não alcança a época ep−2 exigida pela distribuição de stake."""


class ResyncNeeded(RuntimeError):
    """A cadeia não basta para derivar a duração de round de uma época."""


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    reason: Optional[str] = None
    index: Optional[int] = None

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class AdjustmentReport:
    """Entradas e saída do cálculo da duração de round de uma época."""

    epoch: int
    t_prev: int
    raw_values: Tuple[float, ...]
    delta: float
    new: int
    records_used: int
    negative_components: int


def window_adjustment(t_a: Sequence[float], t_b: Sequence[float], t_r: float,
                      omega1: float = 0.3, omega2: float = 0.1) -> float:
    """Valor bruto de uma janela: ω1·(média(t^a) − t_r) + ω2·(média(t^b) − t_r)."""
    if not t_a or not t_b:
        return 0.0
    mean_a = sum(t_a) / len(t_a)
    mean_b = sum(t_b) / len(t_b)
    return omega1 * (mean_a - t_r) + omega2 * (mean_b - t_r)


def apply_transactions(balances: Dict[str, int], txs: Iterable[Transaction]) -> Optional[Dict[str, int]]:
    """Aplica transferências; retorna None se algum saldo ficaria negativo."""
    out = None
    for tx in txs:
        if tx.sender is None or tx.amount == 0:
            continue
        if tx.amount < 0 or tx.recipient is None:
            return None
        if out is None:
            out = dict(balances)
        if out.get(tx.sender, 0) < tx.amount:
            return None
        out[tx.sender] -= tx.amount
        out[tx.recipient] = out.get(tx.recipient, 0) + tx.amount
    return balances if out is None else out


@dataclass
class ChainRules:
    """Contexto compartilhado de validação e derivação de parâmetros por cadeia."""

    genesis: GenesisBlock
    R: int
    f: float
    l_vrf: int
    k: int
    s: int
    vrf: object
    kes: object
    oracle: object
    omega1: float = 0.3
    omega2: float = 0.1
    t_round_min: int = 1
    t_round_max: int = 10 ** 9
    reject_empty_epochs: bool = True
    selection: str = "bg"
    keys: Dict[str, Tuple[str, str]] = field(default_factory=dict)
    rejections: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.R < 2:
            raise ValueError(f"R deve ser ≥ 2: {self.R}")
        self._valid: Set[str] = set()
        self._invalid: Dict[str, str] = {}
        self._balances: Dict[str, Dict[str, int]] = {}
        self._tx_owner: Dict[str, Set[str]] = {}
        self._adj_owner: Dict[Tuple[str, int], Set[str]] = {}
        self._indexed: Set[str] = set()
        self._stake_cache: Dict[Tuple[str, int], StakeDistribution] = {}
        self._nonce_cache: Dict[Tuple[str, int], str] = {}
        self._round_cache: Dict[Tuple[str, int], AdjustmentReport] = {}
        self._genesis_stakes = StakeDistribution.from_mapping(self.genesis.stakes())
        for holder in self.genesis.stakeholders:
            self.keys.setdefault(holder.party, (holder.v_vrf, holder.v_kes))

    # ------------------------------------------------------------------
    # Épocas e prefixos
    # ------------------------------------------------------------------
    def register_keys(self, party: str, v_vrf: str, v_kes: str) -> None:
        self.keys[party] = (v_vrf, v_kes)

    def epoch_of(self, sl: int) -> int:
        return 0 if sl <= 0 else -(-sl // self.R)

    def tip_epoch(self, chain: Chain) -> int:
        return self.epoch_of(chain.blocks[-1].sl) if chain.blocks else 0

    @staticmethod
    def prefix_end(chain: Chain, max_slot: int) -> int:
        """Número de blocos com slot ≤ max_slot."""
        return bisect_right(chain.slots, max_slot)

    def prefix_key(self, chain: Chain, n: int) -> str:
        return chain.blocks[n - 1].hash if n > 0 else self.genesis.hash

    @staticmethod
    def blocks_in_slots(chain: Chain, lo: int, hi: int) -> Tuple[Block, ...]:
        i = bisect_left(chain.slots, lo)
        j = bisect_right(chain.slots, hi)
        return chain.blocks[i:j]

    # ------------------------------------------------------------------
    # Ledger
    # ------------------------------------------------------------------
    def index_block(self, block: Block) -> None:
        """Registra os donos de ids de transação e de AdjustRecords."""
        h = block.hash
        if h in self._indexed:
            return
        self._indexed.add(h)
        for tx in block.st:
            self._tx_owner.setdefault(tx.tx_id, set()).add(h)
        for rec, _ in block.a:
            self._adj_owner.setdefault(rec.key, set()).add(h)

    def _owned_before(self, owners: Optional[Set[str]], chain: Chain, n: int) -> bool:
        if not owners:
            return False
        index = chain.index_by_hash
        return any(index.get(h, n) < n for h in owners)

    def chain_has_tx(self, chain: Chain, tx_id: str, n: Optional[int] = None) -> bool:
        return self._owned_before(self._tx_owner.get(tx_id), chain, len(chain.blocks) if n is None else n)

    def chain_has_adjust(self, chain: Chain, key: Tuple[str, int], n: Optional[int] = None) -> bool:
        return self._owned_before(self._adj_owner.get(key), chain, len(chain.blocks) if n is None else n)

    def balances_at(self, chain: Chain, n: int) -> Dict[str, int]:
        """Saldos após os primeiros n blocos."""
        j = n
        while j > 0 and chain.blocks[j - 1].hash not in self._balances:
            j -= 1
        current = self._genesis_stakes.as_dict if j == 0 else self._balances[chain.blocks[j - 1].hash]
        for block in chain.blocks[j:n]:
            self.index_block(block)
            updated = apply_transactions(current, block.st)
            current = current if updated is None else updated
            self._balances[block.hash] = current
        return current

    # ------------------------------------------------------------------
    # Distribuição de stake e nonce
    # ------------------------------------------------------------------
    def update_stake_dist(self, chain: Chain, ep: int, strict: bool = True) -> Tuple[StakeDistribution, str]:
        """(S_ep, η_ep) derivados da cadeia.

        Raises:
            ChainTooShortError: se strict e a cadeia termina antes da época ep−2
        """
        if ep <= 2:
            return self._genesis_stakes, self.genesis.eta_1
        if strict and self.reject_empty_epochs and self.tip_epoch(chain) < ep - 2:
            raise ChainTooShortError(
                f"Cadeia termina na época {self.tip_epoch(chain)}; distribuição da época {ep} exige a época {ep - 2}"
            )
        n = self.prefix_end(chain, (ep - 2) * self.R)
        key = (self.prefix_key(chain, n), ep)
        dist = self._stake_cache.get(key)
        if dist is None:
            dist = StakeDistribution.from_mapping(self.balances_at(chain, n))
            self._stake_cache[key] = dist
        return dist, self.epoch_nonce(chain, ep)

    def _nonce_key(self, chain: Chain, ep: int) -> Tuple[str, int]:
        n = self.prefix_end(chain, (ep - 2) * self.R + (2 * self.R) // 3)
        return (self.prefix_key(chain, n), ep)

    def epoch_nonce(self, chain: Chain, ep: int) -> str:
        if ep <= 2:
            return self.genesis.eta_1
        pending: List[Tuple[int, Tuple[str, int]]] = []
        value = self.genesis.eta_1
        e = ep
        while e > 2:
            key = self._nonce_key(chain, e)
            cached = self._nonce_cache.get(key)
            if cached is not None:
                value = cached
                break
            pending.append((e, key))
            e -= 1
        for e, key in reversed(pending):
            lo = (e - 2) * self.R + 1
            hi = (e - 2) * self.R + (2 * self.R) // 3
            ys = ",".join(str(b.rho[0]) for b in self.blocks_in_slots(chain, lo, hi))
            value = self.oracle.hexdigest(f"{value}|{e}|{ys}".encode())
            self._nonce_cache[key] = value
        return value

    def leader_threshold(self, dist: StakeDistribution, party: str) -> int:
        return threshold(self.f, dist.relative(party), self.l_vrf)

    # ------------------------------------------------------------------
    # Duração de round
    # ------------------------------------------------------------------
    def _round_key(self, chain: Chain, ep: int) -> Tuple[str, int]:
        n = self.prefix_end(chain, (ep - 2) * self.R + self.R // 2)
        return (self.prefix_key(chain, n), ep)

    def round_lengths(self, chain: Chain, ep: int) -> List[int]:
        """Durações de round das épocas 1..ep."""
        lengths = [self.genesis.t_round_1]
        for e in range(2, ep + 1):
            lengths.append(self._adjust(chain, e, lengths).new)
        return lengths

    def round_length(self, chain: Chain, ep: int) -> int:
        if ep <= 1:
            return self.genesis.t_round_1
        return self.round_lengths(chain, ep)[-1]

    def _adjust(self, chain: Chain, ep: int, lengths: List[int]) -> AdjustmentReport:
        key = self._round_key(chain, ep)
        cached = self._round_cache.get(key)
        if cached is not None:
            return cached
        report = self.adjusting_next_round_length(chain, ep, lengths)
        self._round_cache[key] = report
        return report

    def adjusting_next_round_length(self, chain: Chain, ep: int, lengths: Sequence[int]) -> AdjustmentReport:
        """Nova duração de round da época ep a partir das janelas da cadeia.

        Janela 1: primeiros R/2 slots da época ep−1 (duração da época ep−1).
        Janela 2: últimos R/2 slots da época ep−2 (duração da época ep−2),
        omitida quando ep−1 é a primeira época.
        """
        R, half = self.R, self.R // 2
        t_prev = lengths[ep - 2]
        windows = [((ep - 2) * R + 1, (ep - 2) * R + half, lengths[ep - 2])]
        if ep - 1 > 1:
            windows.append(((ep - 2) * R - half + 1, (ep - 2) * R, lengths[ep - 3]))
        index = chain.index_by_hash
        seen: Set[Tuple[str, int]] = set()
        raw_values: List[float] = []
        usable: List[float] = []
        used = negatives = 0
        for lo, hi, t_r in windows:
            t_a: List[int] = []
            t_b: List[int] = []
            for block in self.blocks_in_slots(chain, lo, hi):
                for rec, t_adj in block.a:
                    if rec.key in seen or rec.b_last is None:
                        continue
                    seen.add(rec.key)
                    pos = index.get(rec.b_last)
                    if pos is None:
                        continue
                    a_value = rec.t_recv - chain.blocks[pos].t_now
                    if a_value > 2 * t_r:
                        continue
                    b_value = rec.t_recv - t_adj
                    if a_value < 0 or b_value < 0:
                        negatives += 1
                    t_a.append(a_value)
                    t_b.append(b_value)
            used += len(t_a)
            raw = window_adjustment(t_a, t_b, t_r, self.omega1, self.omega2) if t_a else 0.0
            raw_values.append(raw)
            if t_a:
                usable.append(raw)
        if used == 0:
            return AdjustmentReport(ep, t_prev, tuple(raw_values), 0.0, t_prev, 0, 0)
        # média só das janelas com registros
        delta = sum(usable) / len(usable)
        value = min(max(t_prev + delta, t_prev / 2), 2 * t_prev)
        value = min(max(value, self.t_round_min), self.t_round_max)
        new = int(math.floor(value + 0.5))
        if negatives:
            logger.warning(f"Época {ep}: {negatives} AdjustRecords com componente negativa")
        logger.debug(
            f"Época {ep}: t_round {t_prev} -> {new} (brutos={raw_values}, delta={delta:.3f}, registros={used})"
        )
        return AdjustmentReport(ep, t_prev, tuple(raw_values), delta, new, used, negatives)

    def slot_window(self, chain: Chain, sl: int) -> Tuple[int, int]:
        """(início, fim) do slot sl, fim exclusivo."""
        ep = self.epoch_of(sl)
        lengths = self.round_lengths(chain, ep)
        t0 = sum(self.R * t for t in lengths[:ep - 1])
        t_r = lengths[ep - 1]
        start = t0 + (sl - (ep - 1) * self.R - 1) * t_r
        return start, start + t_r

    def current_slot_number(self, t_now: int, chain: Chain) -> Tuple[int, int, int]:
        """(sl, t_next, t_round) do instante t_now segundo a cadeia.

        Raises:
            ResyncNeeded: se a cadeia não cobre a época anterior à de t_now
        """
        if t_now <= 0:
            return 0, 0, self.genesis.t_round_1
        tip_ep = self.tip_epoch(chain)
        lengths = [self.genesis.t_round_1]
        t0, e = 0, 1
        while True:
            t_r = lengths[e - 1]
            if t_now <= t0 + self.R * t_r:
                j = -(-(t_now - t0) // t_r)
                return (e - 1) * self.R + j, t0 + j * t_r, t_r
            t0 += self.R * t_r
            e += 1
            if tip_ep < e - 1:
                raise ResyncNeeded(f"Cadeia termina na época {tip_ep}; impossível derivar a época {e}")
            lengths.append(self._adjust(chain, e, lengths).new)

    # ------------------------------------------------------------------
    # Validação
    # ------------------------------------------------------------------
    def _reject(self, chain: Chain, reason: str, index: Optional[int], permanent: bool = True) -> ValidationResult:
        self.rejections[reason] = self.rejections.get(reason, 0) + 1
        if permanent:
            self._invalid[chain.tip_hash] = reason
        logger.debug(f"Cadeia rejeitada ({reason}) no bloco {index}")
        return ValidationResult(False, reason, index)

    def validate(self, chain: Chain, validation_time: int) -> ValidationResult:
        """IsValidChain com código de motivo."""
        if chain.genesis.hash != self.genesis.hash:
            return self._reject(chain, "bad_genesis", None)
        tip = chain.tip_hash
        if tip in self._valid or not chain.blocks:
            return ValidationResult(True)
        if tip in self._invalid:
            return ValidationResult(False, self._invalid[tip], None)
        slots = chain.slots
        if self.reject_empty_epochs:
            tip_ep = self.epoch_of(slots[-1])
            for e in range(1, tip_ep):
                lo = bisect_left(slots, (e - 1) * self.R + 1)
                if lo >= len(slots) or slots[lo] > e * self.R:
                    return self._reject(chain, "empty_epoch", None)
        start = len(chain.blocks)
        while start > 0 and chain.blocks[start - 1].hash not in self._valid:
            start -= 1
        balances = self.balances_at(chain, start)
        for idx in range(start, len(chain.blocks)):
            block = chain.blocks[idx]
            reason = self._check_block(chain, idx, block, balances, validation_time)
            if reason is not None:
                return self._reject(chain, reason, idx, permanent=reason != "future")
            balances = apply_transactions(balances, block.st)
            self.index_block(block)
            self._balances[block.hash] = balances
            self._valid.add(block.hash)
        return ValidationResult(True)

    def is_valid_chain(self, chain: Chain, validation_time: int) -> bool:
        return self.validate(chain, validation_time).ok

    def _check_block(self, chain: Chain, idx: int, block: Block, balances: Dict[str, int],
                     validation_time: int) -> Optional[str]:
        prev_hash = chain.blocks[idx - 1].hash if idx else self.genesis.hash
        if block.h != prev_hash:
            return "badhash"
        if block.sl < 1 or (idx and block.sl <= chain.blocks[idx - 1].sl):
            return "badslot"
        start, end = self.slot_window(chain, block.sl)
        if start > validation_time or block.t_now > validation_time:
            return "future"
        if not start <= block.t_now < end:
            return "bad_time_interval"
        ep = self.epoch_of(block.sl)
        keys = self.keys.get(block.creator)
        if keys is None:
            return "badvrf"
        v_vrf, v_kes = keys
        dist, eta = self.update_stake_dist(chain, ep, strict=False)
        if not self.vrf.verify(v_vrf, vrf_input(eta, block.sl, TEST), block.crt.y, block.crt.pi):
            return "badvrf"
        if block.crt.y >= self.leader_threshold(dist, block.creator):
            return "badvrf"
        if not self.vrf.verify(v_vrf, vrf_input(eta, block.sl, NONCE), block.rho[0], block.rho[1]):
            return "badnonce"
        if not self.kes.verify(v_kes, block.header_bytes(), block.sl, block.sigma):
            return "badsig"
        seen: Set[Tuple[str, int]] = set()
        for rec, _ in block.a:
            if rec.key in seen or not self.adjust_record_ok(chain, idx, rec, block.sl):
                return "badadj"
            seen.add(rec.key)
        ids = set()
        for tx in block.st:
            if tx.tx_id in ids or self.chain_has_tx(chain, tx.tx_id, idx):
                return "invalid_state"
            ids.add(tx.tx_id)
        if apply_transactions(balances, block.st) is None:
            return "invalid_state"
        return None

    def adjust_record_ok(self, chain: Chain, n: int, rec: AdjustRecord, block_sl: int) -> bool:
        """Um AdjustRecord pode entrar no bloco n+1 (slot block_sl) de ``chain``?"""
        if rec.sl >= block_sl or self.chain_has_adjust(chain, rec.key, n):
            return False
        rec_keys = self.keys.get(rec.party)
        if rec_keys is None:
            return False
        rec_dist, rec_eta = self.update_stake_dist(chain, self.epoch_of(rec.sl), strict=False)
        if not self.vrf.verify(rec_keys[0], vrf_input(rec_eta, rec.sl, TEST), rec.y, rec.pi):
            return False
        return rec.y < self.leader_threshold(rec_dist, rec.party)

    # ------------------------------------------------------------------
    def select(self, c_loc: Chain, candidates: Sequence[Chain]) -> Chain:
        if self.selection == "mc":
            return maxvalid_mc(c_loc, candidates)
        return maxvalid_bg(c_loc, candidates, self.k, self.s)
