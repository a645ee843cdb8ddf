"""Strings características, reduções, divergência e verificadores de propriedades.

Funcionalidades:
- Extração da string característica (0, 1, ⊥) a partir dos líderes e blocos de uma execução
- Redução real (0 que não recebeu a mensagem do round anterior vira ⊥) e ⊥-redução
- Divergência por enumeração exaustiva de forks e por programação dinâmica de Pareto
- Verificadores CP, CG, CG2, CQ e ∃CQ sobre fotografias das cadeias no início de cada slot
- Auditorias das reduções de dois slots e das taxas por slot
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple
import logging
import math
from itertools import product

from .chain import Block, Chain
from .network import RD_ON_TIME, DiffusionNetwork

logger = logging.getLogger(__name__)

BOT = "⊥"
SYMBOLS = ("0", "1", BOT)
BRUTE_FORCE_LIMIT = 12
DELIVERY_ROUNDS = 2


# ----------------------------------------------------------------------
# String característica
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class CharString:
    symbols: Tuple[str, ...]

    def __post_init__(self):
        bad = [s for s in self.symbols if s not in SYMBOLS]
        if bad:
            raise ValueError(f"Símbolos inválidos na string característica: {bad[:5]}")

    @classmethod
    def parse(cls, text: str) -> "CharString":
        return cls(tuple(text))

    def __str__(self) -> str:
        return "".join(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def count(self, symbol: str) -> int:
        return sum(1 for s in self.symbols if s == symbol)


def _as_symbols(w) -> Tuple[str, ...]:
    if isinstance(w, CharString):
        return w.symbols
    return tuple(w)


@dataclass(frozen=True)
class SlotOutcome:
    slot: int
    label: str
    delivered_to_next_leader: bool = True


def real_reduction(w, delivered: Sequence[bool]) -> CharString:
    """1 permanece; 0 vira ⊥ quando a mensagem do round anterior não chegou ao seu líder.

    `delivered[j]` diz se a mensagem do slot j chegou ao líder do próximo slot não vazio.
    O símbolo i olha o slot não vazio anterior; se esse slot já virou ⊥ (bloco órfão),
    o líder de i estende a cadeia anterior e o 0 permanece.
    """
    symbols = _as_symbols(w)
    if len(delivered) != len(symbols):
        raise ValueError("Uma flag de entrega por slot é necessária")
    out: List[str] = []
    prev: Optional[int] = None
    for i, sym in enumerate(symbols):
        if sym == BOT:
            out.append(BOT)
            continue
        lost = prev is not None and out[prev] != BOT and not delivered[prev]
        out.append(BOT if sym == "0" and lost else sym)
        prev = i
    return CharString(tuple(out))


def bot_reduction(w) -> CharString:
    return CharString(tuple(s for s in _as_symbols(w) if s != BOT))


def slot_outcomes(L: int, leaders: Dict[int, List[Tuple[str, bool]]],
                  blocks: Dict[str, Block]) -> List[SlotOutcome]:
    """Rotula cada slot 1..L e calcula a flag de entrega de cada slot não vazio.

    A flag do slot j é verdadeira quando algum bloco de j é ancestral do bloco
    emitido no próximo slot não vazio.

    Args:
        L: número de slots
        leaders: slot -> lista de (parte, honesta) eleitas no slot
        blocks: todos os blocos emitidos, por hash
    """
    by_slot: Dict[int, List[Block]] = {}
    for block in blocks.values():
        by_slot.setdefault(block.sl, []).append(block)
    nonempty = [sl for sl in range(1, L + 1) if leaders.get(sl)]
    successor = dict(zip(nonempty, nonempty[1:]))
    out = []
    for sl in range(1, L + 1):
        chosen = leaders.get(sl, [])
        if not chosen:
            out.append(SlotOutcome(sl, BOT))
            continue
        label = "1" if len(chosen) > 1 or not chosen[0][1] else "0"
        out.append(SlotOutcome(sl, label, _delivered(sl, successor.get(sl), by_slot, blocks)))
    return out


def _delivered(sl: int, nxt: Optional[int], by_slot: Dict[int, List[Block]],
               blocks: Dict[str, Block]) -> bool:
    own = by_slot.get(sl, [])
    if not own:
        return False
    if nxt is None or not by_slot.get(nxt):
        return True
    targets = {b.hash for b in own}
    for block in by_slot[nxt]:
        cur: Optional[Block] = block
        while cur is not None and cur.sl > sl:
            cur = blocks.get(cur.h)
        if cur is not None and cur.hash in targets:
            return True
    return False


def characteristic_string(outcomes: Iterable[SlotOutcome]) -> CharString:
    return CharString(tuple(o.label for o in outcomes))


def reduced_string(outcomes: Sequence[SlotOutcome]) -> CharString:
    return real_reduction(characteristic_string(outcomes), [o.delivered_to_next_leader for o in outcomes])


# ----------------------------------------------------------------------
# Divergência
# ----------------------------------------------------------------------
def _bits(w) -> List[int]:
    symbols = _as_symbols(w)
    if any(s == BOT for s in symbols):
        symbols = bot_reduction(symbols).symbols
    return [1 if s == "1" else 0 for s in symbols]


def _suffix_ones(bits: List[int]) -> List[int]:
    suffix = [0] * (len(bits) + 1)
    for i in range(len(bits) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + bits[i]
    return suffix


def divergence_bruteforce(w) -> int:
    """Divergência por enumeração de todos os forks preguiçosos.

    Vértices: raiz e um vértice honesto por slot 0, com profundidade estritamente
    crescente. Alcance r(v) = (1s após o rótulo de v) − (h − d(v)). Num slot 0 o
    novo vértice estende qualquer v com r(v) ≥ 0. O valor de um fork é o máximo,
    sobre pares de vértices com alcance não negativo, de h + min(r) − d(lca).
    """
    bits = _bits(w)
    n = len(bits)
    suffix = _suffix_ones(bits)
    memo: Dict[Any, int] = {}

    def fork_value(verts, lca, h, ones) -> int:
        reach = [ones - o - (h - d) for d, o in verts]
        best = 0
        for x in range(len(verts)):
            if reach[x] < 0:
                continue
            for y in range(x, len(verts)):
                if reach[y] >= 0:
                    best = max(best, h + min(reach[x], reach[y]) - lca[x][y])
        return best

    def solve(i, verts, lca, h, ones) -> int:
        key = (i, verts, lca, h, ones)
        cached = memo.get(key)
        if cached is not None:
            return cached
        value = fork_value(verts, lca, h, ones)
        if i < n:
            if bits[i]:
                value = max(value, solve(i + 1, verts, lca, h, ones + 1))
            else:
                remaining = suffix[i + 1]
                for p, (d_p, o_p) in enumerate(verts):
                    if ones - o_p - (h - d_p) < 0:
                        continue
                    # lca(novo, q) = lca(p, q); a diagonal guarda a própria profundidade
                    new_verts = verts + ((h + 1, ones),)
                    new_lca = tuple(lca[q] + (lca[p][q],) for q in range(len(verts)))
                    new_lca += (lca[p] + (h + 1,),)
                    keep = [q for q, (d, o) in enumerate(new_verts)
                            if ones - o - (h + 1 - d) + remaining >= 0]
                    pruned_verts = tuple(new_verts[q] for q in keep)
                    pruned_lca = tuple(tuple(new_lca[a][b] for b in keep) for a in keep)
                    value = max(value, solve(i + 1, pruned_verts, pruned_lca, h + 1, ones))
        memo[key] = value
        return value

    return solve(0, ((0, 0),), ((0,),), 0, 0)


def _pareto(states: Set[Tuple[int, int, int]]) -> List[Tuple[int, int, int]]:
    ordered = sorted(states, reverse=True)
    kept: List[Tuple[int, int, int]] = []
    for s in ordered:
        if not any(k[0] >= s[0] and k[1] >= s[1] and k[2] >= s[2] for k in kept):
            kept.append(s)
    return kept


def divergence_recurrence(w) -> int:
    """Divergência por programação dinâmica sobre pares de tines.

    Estado (δ, a, b): δ = h − d(lca) do par e a ≤ b os alcances das duas tines.
    """
    bits = _bits(w)
    suffix = _suffix_ones(bits)
    states: List[Tuple[int, int, int]] = [(0, 0, 0)]
    best = 0
    for i, bit in enumerate(bits):
        remaining = suffix[i + 1]
        nxt: Set[Tuple[int, int, int]] = set()
        if bit:
            nxt.update((d, a + 1, b + 1) for d, a, b in states)
        else:
            for d, a, b in states:
                candidates = [(d + 1, a - 1, b - 1)]
                if a >= 0:
                    candidates.append((d + 1, 0, b - 1))
                if b >= 0:
                    candidates.append((d + 1, a - 1, 0))
                for nd, x, y in candidates:
                    lo, hi = min(x, y), max(x, y)
                    if lo + remaining >= 0:
                        nxt.add((nd, lo, hi))
            nxt.add((0, 0, 0))
        states = _pareto(nxt)
        for d, a, _ in states:
            if a >= 0:
                best = max(best, d + a)
    return best


def divergence(w) -> int:
    bits = _bits(w)
    if len(bits) <= BRUTE_FORCE_LIMIT:
        return divergence_bruteforce(bits_to_string(bits))
    return divergence_recurrence(bits_to_string(bits))


def bits_to_string(bits: Sequence[int]) -> str:
    return "".join("1" if b else "0" for b in bits)


def divergence_equivalence(max_length: int = 12) -> List[Dict[str, Any]]:
    """Strings binárias de comprimento ≤ max_length em que os dois cálculos diferem."""
    mismatches = []
    for n in range(max_length + 1):
        for bits in product("01", repeat=n):
            w = "".join(bits)
            brute, fast = divergence_bruteforce(w), divergence_recurrence(w)
            if brute != fast:
                mismatches.append({"string": w, "bruteforce": brute, "recurrence": fast})
    if mismatches:
        logger.warning(f"{len(mismatches)} strings com divergências diferentes")
    return mismatches


# ----------------------------------------------------------------------
# Traços de execução e verificadores
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class OnsetSnapshot:
    """Cadeia de uma parte alerta no início (t_begin) de um slot."""

    party: str
    slot: int
    t_begin: int
    chain: Chain


@dataclass
class RunTrace:
    snapshots: List[OnsetSnapshot] = field(default_factory=list)
    adversarial_blocks: Set[str] = field(default_factory=set)

    def by_slot(self) -> Dict[int, List[OnsetSnapshot]]:
        groups: Dict[int, List[OnsetSnapshot]] = {}
        for snap in self.snapshots:
            groups.setdefault(snap.slot, []).append(snap)
        return groups

    def by_party(self) -> Dict[str, List[OnsetSnapshot]]:
        groups: Dict[str, List[OnsetSnapshot]] = {}
        for snap in sorted(self.snapshots, key=lambda s: (s.party, s.slot)):
            groups.setdefault(snap.party, []).append(snap)
        return groups


@dataclass
class Violation:
    prop: str
    slot: int
    party: str
    witness: Dict[str, Any]

    def to_dict(self) -> Dict[str, Any]:
        return {"property": self.prop, "slot": self.slot, "party": self.party, "witness": self.witness}


@dataclass
class ViolationReport:
    prop: str
    params: Dict[str, Any]
    checked: int = 0
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> Dict[str, Any]:
        return {
            "property": self.prop,
            "params": self.params,
            "checked": self.checked,
            "violations": [v.to_dict() for v in self.violations],
        }


def _chain_ref(chain: Chain) -> Dict[str, Any]:
    return {"length": len(chain), "tip": chain.tip_hash[:16]}


def check_cp(run: RunTrace, k: int) -> ViolationReport:
    """Prefixo comum: C_u sem os últimos k blocos é prefixo de C_v para u ≤ v."""
    report = ViolationReport("CP", {"k": k})
    committed: Optional[Chain] = None
    origin: Tuple[str, int] = ("", 0)
    for slot, group in sorted(run.by_slot().items()):
        for snap in group:
            report.checked += 1
            if committed is not None and not committed.is_prefix_of(snap.chain):
                report.violations.append(Violation("CP", slot, snap.party, {
                    "earlier_party": origin[0], "earlier_slot": origin[1],
                    "committed": _chain_ref(committed), "chain": _chain_ref(snap.chain),
                    "fork_point": committed.common_prefix_length(snap.chain),
                }))
        distinct: Dict[str, OnsetSnapshot] = {}
        for snap in group:
            distinct.setdefault(snap.chain.tip_hash, snap)
        for a in distinct.values():
            cut = a.chain.truncated(k)
            for b in group:
                if b.chain.tip_hash != a.chain.tip_hash and not cut.is_prefix_of(b.chain):
                    report.violations.append(Violation("CP", slot, b.party, {
                        "earlier_party": a.party, "earlier_slot": slot,
                        "committed": _chain_ref(cut), "chain": _chain_ref(b.chain),
                        "fork_point": cut.common_prefix_length(b.chain),
                    }))
        for snap in distinct.values():
            cut = snap.chain.truncated(k)
            if committed is None or not cut.is_prefix_of(committed):
                committed = cut
                origin = (snap.party, slot)
    return report


def check_cg(run: RunTrace, tau: float, s: int) -> ViolationReport:
    """Crescimento: para u < v com v − u ≥ s, len(C_v) − len(C_u) ≥ τ(v − u)."""
    report = ViolationReport("CG", {"tau": tau, "s": s})
    for party, snaps in run.by_party().items():
        best_u: Optional[OnsetSnapshot] = None
        j = 0
        for snap in snaps:
            report.checked += 1
            while j < len(snaps) and snaps[j].slot <= snap.slot - s:
                cand = snaps[j]
                if best_u is None or len(cand.chain) - tau * cand.slot > len(best_u.chain) - tau * best_u.slot:
                    best_u = cand
                j += 1
            if best_u is None:
                continue
            if len(snap.chain) - tau * snap.slot < len(best_u.chain) - tau * best_u.slot - 1e-9:
                report.violations.append(Violation("CG", snap.slot, party, {
                    "u": best_u.slot, "v": snap.slot,
                    "growth": len(snap.chain) - len(best_u.chain),
                    "required": tau * (snap.slot - best_u.slot),
                }))
    return report


def check_cg2(run: RunTrace, tau: float, s: int) -> ViolationReport:
    """Crescimento entre duas partes: a cadeia em v cresce τ(v − u) sobre qualquer cadeia em u."""
    report = ViolationReport("CG2", {"tau": tau, "s": s})
    groups = sorted(run.by_slot().items())
    best: Optional[Tuple[int, int]] = None  # (slot, comprimento máximo)
    j = 0
    for slot, group in groups:
        report.checked += len(group)
        while j < len(groups) and groups[j][0] <= slot - s:
            u_slot, u_group = groups[j]
            longest = max(len(g.chain) for g in u_group)
            if best is None or longest - tau * u_slot > best[1] - tau * best[0]:
                best = (u_slot, longest)
            j += 1
        if best is None:
            continue
        shortest = min(group, key=lambda g: len(g.chain))
        if len(shortest.chain) - tau * slot < best[1] - tau * best[0] - 1e-9:
            report.violations.append(Violation("CG2", slot, shortest.party, {
                "u": best[0], "v": slot, "growth": len(shortest.chain) - best[1],
                "required": tau * (slot - best[0]),
            }))
    return report


def check_cq(run: RunTrace, mu: float, k: int) -> ViolationReport:
    """Qualidade: toda janela de ≥ k blocos consecutivos tem fração honesta ≥ μ."""
    report = ViolationReport("CQ", {"mu": mu, "k": k})
    checked_ends: Set[str] = set()
    adversarial = run.adversarial_blocks
    for snap in sorted(run.snapshots, key=lambda s: (s.slot, s.party)):
        report.checked += 1
        blocks = snap.chain.blocks
        n = len(blocks)
        if n < k:
            continue
        start = n
        while start > 0 and blocks[start - 1].hash not in checked_ends:
            start -= 1
        if start == n:
            continue
        prefix = [0] * (n + 1)
        for i, b in enumerate(blocks):
            prefix[i + 1] = prefix[i] + (0 if b.hash in adversarial else 1)
        for end in range(max(start, k - 1), n):
            checked_ends.add(blocks[end].hash)
            for length in range(k, min(2 * k - 1, end + 1) + 1):
                honest = prefix[end + 1] - prefix[end + 1 - length]
                if honest < mu * length - 1e-9:
                    report.violations.append(Violation("CQ", snap.slot, snap.party, {
                        "first_block": end + 1 - length, "last_block": end,
                        "honest": honest, "length": length,
                    }))
                    break
        for end in range(start, min(k - 1, n)):
            checked_ends.add(blocks[end].hash)
    return report


def check_ecq(run: RunTrace, s: int) -> ViolationReport:
    """∃CQ: toda janela de s slots consecutivos concluídos contém um bloco honesto."""
    report = ViolationReport("ECQ", {"s": s})
    adversarial = run.adversarial_blocks
    gaps: Dict[str, Tuple[int, int]] = {}  # tip -> (maior lacuna interna, último slot honesto)
    for snap in sorted(run.snapshots, key=lambda s: (s.slot, s.party)):
        report.checked += 1
        blocks = snap.chain.blocks
        j = len(blocks)
        while j > 0 and blocks[j - 1].hash not in gaps:
            j -= 1
        max_gap, last = gaps[blocks[j - 1].hash] if j > 0 else (0, 0)
        for b in blocks[j:]:
            if b.hash not in adversarial:
                max_gap = max(max_gap, b.sl - last - 1)
                last = b.sl
            gaps[b.hash] = (max_gap, last)
        horizon = snap.slot - DELIVERY_ROUNDS
        end_gap = max(0, horizon - last)
        if max(max_gap, end_gap) >= s:
            report.violations.append(Violation("ECQ", snap.slot, snap.party, {
                "largest_gap": max(max_gap, end_gap), "last_honest_slot": last,
            }))
    return report


# ----------------------------------------------------------------------
# Auditorias
# ----------------------------------------------------------------------
# imagens de cada cenário quando a mensagem dos primeiros slots atrasa
CASE_TABLE: Dict[str, Tuple[str, ...]] = {
    "00": ("0⊥", "⊥0"),
    "01": ("⊥1",),
    "10": ("1⊥",),
    "11": ("11",),
    "000": ("0⊥0", "⊥⊥0"),
}
# slots cuja mensagem pode atrasar em cada cenário
DELAYED_SLOTS = {"00": (0,), "01": (0,), "10": (0,), "11": (0,), "000": (0, 1)}


def allowed_images(w: str) -> Set[str]:
    """Imagens admitidas: a própria string (sem atraso) e as da tabela de casos.

    Em "000" um atraso só no segundo slot reproduz o caso "00" nos dois últimos.
    """
    if w not in CASE_TABLE:
        raise ValueError(f"Cenário sem tabela de casos: {w!r}")
    images = {w, *CASE_TABLE[w]}
    if w == "000":
        images.add("0" + CASE_TABLE["00"][0])
    return images


@dataclass
class CaseAuditReport:
    eta: float
    trials: int
    images: Dict[str, Dict[str, int]] = field(default_factory=dict)
    disallowed: List[Dict[str, Any]] = field(default_factory=list)
    survived: int = 0
    exposed: int = 0

    @property
    def survival_rate(self) -> float:
        return self.survived / self.exposed if self.exposed else 1.0

    @property
    def survival_floor(self) -> float:
        if not self.exposed:
            return 0.0
        return self.eta - 3 * math.sqrt(self.eta * (1 - self.eta) / self.exposed)

    @property
    def ok(self) -> bool:
        return not self.disallowed and self.survival_rate >= self.survival_floor

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eta": self.eta, "trials": self.trials, "images": self.images,
            "disallowed": self.disallowed, "survival_rate": self.survival_rate,
            "survival_floor": self.survival_floor, "ok": self.ok,
        }


def lemma3_case_audit(eta: float, trials: int = 10_000, seed: int = 0,
                      scenarios: Sequence[str] = ("00", "01", "10", "11", "000")) -> CaseAuditReport:
    """Enumera cenários curtos, sorteia entregas pela rede e confere as imagens da redução real.

    Só a mensagem dos slots de `DELAYED_SLOTS` pode atrasar: chega ao próximo líder
    com rd=0 (probabilidade η). Os demais slots entregam sempre.

    Raises:
        ValueError: cenário fora da tabela de casos
    """
    net = DiffusionNetwork("audit", eta, seed)
    report = CaseAuditReport(eta=eta, trials=trials)
    for scenario in scenarios:
        allowed = allowed_images(scenario)
        drawn = DELAYED_SLOTS[scenario]
        counts: Dict[str, int] = {}
        for trial in range(trials):
            flags = [net.draw_rd() == RD_ON_TIME if i in drawn else True for i in range(len(scenario))]
            image = str(real_reduction(scenario, flags))
            counts[image] = counts.get(image, 0) + 1
            if image not in allowed:
                report.disallowed.append({"scenario": scenario, "trial": trial, "image": image})
            for i in range(1, len(scenario)):
                if scenario[i] == "0" and i - 1 in drawn and image[i - 1] != BOT:
                    report.exposed += 1
                    report.survived += int(image[i] == "0")
        report.images[scenario] = dict(sorted(counts.items()))
    logger.info(
        f"Auditoria de casos: {len(report.disallowed)} imagens inválidas, "
        f"sobrevivência {report.survival_rate:.4f} (piso {report.survival_floor:.4f})"
    )
    return report


@dataclass
class RateAuditReport:
    slots: int
    freq_zero: float
    bound_zero: float
    freq_bot: float
    bound_bot: float
    sigma_zero: float
    sigma_bot: float

    @property
    def zero_ok(self) -> bool:
        return self.freq_zero >= self.bound_zero - 3 * self.sigma_zero

    @property
    def bot_ok(self) -> bool:
        return self.freq_bot <= self.bound_bot + 3 * self.sigma_bot

    @property
    def ok(self) -> bool:
        return self.zero_ok and self.bot_ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            "slots": self.slots, "freq_zero": self.freq_zero, "bound_zero": self.bound_zero,
            "freq_bot": self.freq_bot, "bound_bot": self.bound_bot,
            "zero_ok": self.zero_ok, "bot_ok": self.bot_ok,
        }


def lemma6_rate_audit(reduced: CharString, alpha: float, f: float, eta: float,
                      participation: float = 1.0) -> RateAuditReport:
    """Compara frequências de 0 e ⊥ na string reduzida com α(1−f)²η e 1 − f·S⁻·η."""
    n = len(reduced)
    if n == 0:
        raise ValueError("String reduzida vazia")
    freq_zero = reduced.count("0") / n
    freq_bot = reduced.count(BOT) / n
    bound_zero = alpha * (1 - f) ** 2 * eta
    bound_bot = 1 - f * participation * eta
    p0 = min(max(bound_zero, 0.0), 1.0)
    pb = min(max(bound_bot, 0.0), 1.0)
    return RateAuditReport(
        slots=n, freq_zero=freq_zero, bound_zero=bound_zero, freq_bot=freq_bot, bound_bot=bound_bot,
        sigma_zero=math.sqrt(p0 * (1 - p0) / n), sigma_bot=math.sqrt(pb * (1 - pb) / n),
    )
