"""Orquestração determinística de execuções.

Funcionalidades:
- Montagem do mundo simulado (relógio, redes, funcionalidades, partes, adversário)
- Laço por tick: eventos agendados, promoções da rede, ativações, vazamentos e adversário
- Eventos ruins verificados durante a execução (sincronia de rounds) e no fim (CP, CG, CQ)
- Gate opcional do wrapper por slot
- Relatório canônico da execução e varreduras paralelas

Estratégia:
    A ordem de ativação dentro de um tick é fixa (id ascendente) ou embaralhada
    com um gerador semeado; toda a aleatoriedade deriva da seed do cenário.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Set, Tuple
import logging
import math
import time

import joblib
import numpy as np

try:
    from tqdm import tqdm
except ImportError:
    tqdm = None

from .adversary import (AdmissibilitySnapshot, AdversaryStrategy, CorruptionEvent, apply_commands,
                        build_strategy, check_admissibility)
from .analysis import (OnsetSnapshot, RunTrace, characteristic_string, check_cg, check_cg2, check_cp,
                       check_cq, check_ecq, divergence, reduced_string, slot_outcomes)
from .bounds import bounds_row
from .chain import Block, Chain, InitFunctionality, Transaction, vrf_input
from .clock import AutoClock, PacingStall, majority_value
from .config import ConfigError, Scenario
from .crypto import TEST, KesFunctionality, RandomOracle, VrfFunctionality, ro_hash
from .network import DiffusionNetwork, DrawOverride
from .output_formats import report_to_pdf, report_to_txt, write_metrics_csv, write_report_json, \
    write_table, write_trace_jsonl
from .party import PHASE_DONE, PHASE_PARKED, PHASE_PREWAIT, Party, ProtocolContext

logger = logging.getLogger(__name__)

NETWORK_NAMES = ("bc", "tx", "adj", "join")
REPORT_SCHEMA_VERSION = 1
# strings reduzidas maiores ficam sem divergência no relatório
DIVERGENCE_REPORT_LIMIT = 2000
EXIT_CODES = {"clean": 0, "violation": 2, "failed": 2, "halted": 3}
VERDICTS = {
    "CP": "common prefix violation",
    "CG": "chain growth violation",
    "CG2": "chain growth violation",
    "CQ": "chain quality violation",
    "ECQ": "chain quality violation",
}


class BadEvent(RuntimeError):
    """Evento ruim que aborta a execução (com testemunha)."""

    def __init__(self, message: str, witness: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.witness = witness or {}


class WrapperViolation(RuntimeError):
    """O round não respeitou as restrições do wrapper; a execução é interrompida."""

    def __init__(self, message: str, snapshot: Optional[AdmissibilitySnapshot] = None):
        super().__init__(message)
        self.snapshot = snapshot


@dataclass
class RunReport:
    seed: int
    status: str
    verdict: Optional[str]
    scenario: Dict[str, Any]
    slots: int
    ticks: int
    characteristic_string: str
    reduced_string: str
    divergence: Optional[int] = None
    properties: Dict[str, Any] = field(default_factory=dict)
    eta_per_round: List[Optional[float]] = field(default_factory=list)
    leader_rate: Dict[str, float] = field(default_factory=dict)
    blocks_per_party: Dict[str, int] = field(default_factory=dict)
    nonempty_rate: float = 0.0
    round_lengths: Dict[str, int] = field(default_factory=dict)
    bounds: Dict[str, Any] = field(default_factory=dict)
    final_chain: Dict[str, Any] = field(default_factory=dict)
    delivery: Dict[str, int] = field(default_factory=dict)
    rejections: Dict[str, int] = field(default_factory=dict)
    witness: Dict[str, Any] = field(default_factory=dict)
    truncated: bool = False

    @property
    def exit_code(self) -> int:
        return EXIT_CODES.get(self.status, 1)

    @property
    def violation_count(self) -> int:
        return sum(len(p.get("violations", [])) for p in self.properties.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema": REPORT_SCHEMA_VERSION,
            "seed": self.seed,
            "status": self.status,
            "verdict": self.verdict,
            "scenario": self.scenario,
            "slots": self.slots,
            "ticks": self.ticks,
            "characteristic_string": self.characteristic_string,
            "reduced_string": self.reduced_string,
            "divergence": self.divergence,
            "properties": self.properties,
            "eta_per_round": self.eta_per_round,
            "leader_rate": self.leader_rate,
            "blocks_per_party": self.blocks_per_party,
            "nonempty_rate": self.nonempty_rate,
            "round_lengths": self.round_lengths,
            "bounds": self.bounds,
            "final_chain": self.final_chain,
            "delivery": self.delivery,
            "rejections": self.rejections,
            "witness": self.witness,
            "truncated": self.truncated,
        }


class Simulation:
    """Uma execução completa de um cenário.

    Args:
        scenario: cenário validado
        draw_override: sorteio roteirizado de rd na rede bc (cenários de figura)
        strategy: estratégia adversarial já construída (substitui a do cenário)
        leader_slots: parte -> slots em que é líder; as demais avaliações VRF ficam acima do limiar
    """

    def __init__(self, scenario: Scenario, draw_override: Optional[DrawOverride] = None,
                 strategy: Optional[AdversaryStrategy] = None,
                 leader_slots: Optional[Dict[str, Set[int]]] = None):
        self.scenario = scenario
        self.params = scenario.protocol_params()
        seed = scenario.seed
        self.events: List[Dict[str, Any]] = []
        self.clock = AutoClock(scenario.t_start, self.params.t_run)
        self.oracle = RandomOracle(seed)
        self.vrf = VrfFunctionality(seed, scenario.l_vrf)
        self.kes = KesFunctionality(seed)
        self.init = InitFunctionality(scenario.initial_stakes, scenario.t_start, scenario.t_round_1, self.oracle)
        self.networks: Dict[str, DiffusionNetwork] = {}
        for i, name in enumerate(NETWORK_NAMES):
            self.networks[name] = DiffusionNetwork(
                name, scenario.eta, seed * len(NETWORK_NAMES) + i, clock=self.clock, trace=self._emit,
                draw_override=draw_override if name == "bc" else None,
            )
            self.networks[name].round_length = scenario.t_round_1
        self.ctx = ProtocolContext(self.params, self.clock, self.oracle, self.vrf, self.kes, self.init,
                                   self.networks, trace=self._emit)
        self.strategy = strategy or build_strategy(scenario.adversary, seed)
        self.parties: Dict[str, Party] = {pid: Party(pid, self.ctx) for pid in scenario.party_ids}
        self._order_rng = np.random.default_rng(seed + 1)
        self._scheduled: Dict[int, List[Callable[[int], None]]] = {}
        self.leaders: Dict[int, List[Tuple[str, bool]]] = {}
        self.blocks: Dict[str, Block] = {}
        self.adversarial: Set[str] = set()
        self.snapshots: List[OnsetSnapshot] = []
        self.slot_start: Dict[int, int] = {}
        self.epoch_rounds: Dict[int, Set[int]] = {}
        self.corruptions: List[CorruptionEvent] = []
        self.truncated = False
        self._wrapper_slot = 0
        self._wrapper_window = 0
        self._tick_cap = scenario.tick_cap
        if leader_slots is not None:
            self._program_leaders(leader_slots)
        self._setup()

    # ------------------------------------------------------------------
    # Montagem
    # ------------------------------------------------------------------
    def _program_leaders(self, leader_slots: Dict[str, Set[int]]) -> None:
        """Fixa as saídas VRF de TEST na época 1: 0 para líder, 2^l − 1 caso contrário."""
        eta_1 = ro_hash(b"eta_1", self.oracle.seed).hex()
        top = 2 ** self.scenario.l_vrf - 1
        for pid in self.scenario.party_ids:
            keys = self.vrf.keygen(pid)
            chosen = leader_slots.get(pid, set())
            for sl in range(1, min(self.params.L, self.params.R) + 1):
                self.vrf.program(keys.v_vrf, vrf_input(eta_1, sl, TEST), 0 if sl in chosen else top)

    def _at(self, tick: int, action: Callable[[int], None]) -> None:
        self._scheduled.setdefault(max(tick, -self.scenario.t_start), []).append(action)

    def _setup(self) -> None:
        sc = self.scenario
        late = set(sc.late_joiners)
        for pid, party in self.parties.items():
            if pid in late:
                continue
            for resource in ("ro", "clock", "ledger"):
                party.register(resource)
        for pid in sc.corrupted:
            self._at(-sc.t_start, lambda now, pid=pid: self._corrupt(pid, now))
        for ev in sc.corruption_schedule:
            self._at(ev.tick, lambda now, pid=ev.party: self._corrupt(pid, now))
        for ev in sc.availability:
            self._at(ev.tick, lambda now, ev=ev: self._availability(ev.party, ev.action, now))
        for ev in sc.transactions:
            tx = Transaction(ev.tx_id, ev.sender, ev.recipient, ev.amount)
            self._at(ev.tick, lambda now, pid=ev.party, tx=tx: self.parties[pid].submit(tx, now))

    def _corrupt(self, pid: str, now: int) -> None:
        party = self.parties[pid]
        if not party.honest:
            return
        party.corrupt(self.strategy.behavior())
        self.corruptions.append(CorruptionEvent(now, pid))

    def _availability(self, pid: str, action: str, now: int) -> None:
        party = self.parties[pid]
        logger.debug(f"Disponibilidade: {pid} {action} em now={now}")
        if action == "join":
            for resource in ("ro", "clock", "ledger"):
                party.register(resource)
        elif action == "leave":
            party.deregister("ledger")
        elif action == "stall":
            party.deregister("ro")
        elif action == "unstall":
            party.register("ro")
        elif action == "offline":
            party.deregister("network")
        elif action == "online":
            party.rejoin()
        elif action == "clock_off":
            party.deregister("clock")
        elif action == "clock_on":
            party.register("clock")

    # ------------------------------------------------------------------
    # Trace
    # ------------------------------------------------------------------
    def _emit(self, record: Dict[str, Any]) -> None:
        event = record.get("event")
        if event == "round":
            self._on_round(record)
        elif event == "block":
            self._on_block(record)
        if self.scenario.trace:
            self.events.append({"tick": self.clock.now, **record})

    def _on_round(self, record: Dict[str, Any]) -> None:
        party = self.parties[record["party"]]
        sl = record["sl"]
        self.slot_start.setdefault(sl, record["t_begin"])
        if not party.alert:
            return
        ep = self.ctx.rules.epoch_of(sl)
        self.epoch_rounds.setdefault(ep, set()).add(record["t_round"])
        if self.scenario.checks.enabled:
            self.snapshots.append(OnsetSnapshot(party.id, sl, record["t_begin"], party.chain))

    def _on_block(self, record: Dict[str, Any]) -> None:
        party = self.parties[record["party"]]
        block = party.chain.head
        self.blocks[block.hash] = block
        if not party.honest:
            self.adversarial.add(block.hash)

    # ------------------------------------------------------------------
    # Laço principal
    # ------------------------------------------------------------------
    def _order(self) -> List[str]:
        ids = list(self.parties)
        if self.scenario.activation == "shuffle":
            return [ids[i] for i in self._order_rng.permutation(len(ids))]
        return ids

    def tick(self, now: int) -> None:
        """Um tick completo: agenda, promoções, ativações, adversário e verificações."""
        for action in self._scheduled.pop(now, []):
            action(now)
        for net in self.networks.values():
            net.release_due(now)
        for pid in self._order():
            party = self.parties[pid]
            before = len(party.leader_slots)
            party.maintain(now)
            for sl in party.leader_slots[before:]:
                self.leaders.setdefault(sl, []).append((pid, party.honest))
        for name in NETWORK_NAMES:
            for leak in self.networks[name].drain_leaks():
                apply_commands(self.strategy.on_leak(leak), self.networks)
        apply_commands(self.strategy.after_tick(now, self.networks), self.networks)
        for net in self.networks.values():
            net.release_untouched(now)
        self._sync_round_length()
        self._check_round_synchrony(now)
        if self.scenario.wrapper.enabled:
            self._check_wrapper(now)

    def _sync_round_length(self) -> None:
        value = majority_value(p.t_round for p in self.parties.values() if p.alert)
        if value is not None:
            for net in self.networks.values():
                net.round_length = value

    def _check_round_synchrony(self, now: int) -> None:
        views: Dict[Tuple[int, int, int], List[str]] = {}
        for party in self.parties.values():
            if party.alert and party.phase in (PHASE_PARKED, PHASE_PREWAIT):
                views.setdefault((party.sl, party.t_next, party.t_round), []).append(party.id)
        if len(views) > 1:
            witness = {"tick": now, "views": [
                {"sl": sl, "t_next": t_next, "t_round": t_round, "parties": ids}
                for (sl, t_next, t_round), ids in sorted(views.items())
            ]}
            raise BadEvent("Abort simulation: round-synchrony violation", witness)

    def _check_wrapper(self, now: int) -> None:
        alert = [p for p in self.parties.values() if p.alert]
        if not alert or self.ctx.rules is None:
            return
        sl = max(p.sl for p in alert)
        if sl <= self._wrapper_slot:
            return
        self._wrapper_slot = sl
        ref = alert[0].chain
        balances = self.ctx.rules.balances_at(ref, len(ref.blocks))
        total = sum(balances.values()) or 1
        alert_ratio = sum(balances.get(p.id, 0) for p in alert) / total
        participation = sum(balances.get(p.id, 0) for p in self.parties.values() if p.active) / total
        constraints = self.scenario.constraints()
        stats = self.networks["bc"].stats
        copies = sum(n for t, n in stats.sent.items() if self._wrapper_window <= t <= now)
        delivery = None
        realized = None
        if copies >= self.scenario.wrapper.min_copies:
            realized = stats.ratio(self._wrapper_window, now + 1)
            b = constraints.eta
            margin = self.scenario.wrapper.sigmas * math.sqrt(b * (1 - b) / copies)
            delivery = min(1.0, realized + margin)
            self._wrapper_window = now + 1
        snapshot = AdmissibilitySnapshot(alert_ratio, participation, delivery,
                                         {"slot": sl, "copies": copies, "realized_eta": realized})
        if not check_admissibility(snapshot, constraints):
            raise WrapperViolation(
                f"Wrapper violado no slot {sl}: alerta={alert_ratio:.3f} participação={participation:.3f} "
                f"η realizado={realized}", snapshot)

    def _finished(self, now: int) -> bool:
        if now < 0:
            return False
        live = [p for p in self.parties.values()
                if p.registered["clock"] and p.registered["ledger"] and p.registered["ro"] and p.online]
        if live:
            return all(p.phase == PHASE_DONE for p in live)
        return not any(t > now for t in self._scheduled)

    def execute(self) -> Tuple[str, Optional[str], Dict[str, Any]]:
        """Executa o laço até todas as partes vivas concluírem L slots."""
        now = self.clock.now
        try:
            while True:
                self.tick(now)
                if self._finished(now):
                    break
                if now >= self._tick_cap:
                    logger.warning(f"Limite de ticks atingido em now={now}; execução truncada")
                    self.truncated = True
                    break
                try:
                    now = self.clock.clock_advance()
                except PacingStall:
                    self.clock.force_round_update()
                    now = self.clock.clock_advance()
        except WrapperViolation as e:
            logger.warning(str(e))
            return "halted", str(e), dict(e.snapshot.details) if e.snapshot else {}
        except BadEvent as e:
            logger.warning(str(e))
            return "failed", str(e), e.witness
        return "clean", None, {}

    def run(self) -> RunReport:
        started = time.perf_counter()
        status, verdict, witness = self.execute()
        report = self.build_report(status, verdict, witness)
        logger.info(f"Execução concluída: {report.slots} slots, {len(self.blocks)} blocos, "
                    f"status={report.status} em {time.perf_counter() - started:.2f}s")
        return report

    # ------------------------------------------------------------------
    # Relatório
    # ------------------------------------------------------------------
    def final_chain(self) -> Optional[Chain]:
        """Maior cadeia entre as partes honestas (empate: menor id)."""
        best = None
        for party in self.parties.values():
            if party.honest and party.chain is not None:
                if best is None or len(party.chain) > len(best):
                    best = party.chain
        return best

    def _eta_per_round(self) -> List[Optional[float]]:
        stats = self.networks["bc"].stats
        slots = sorted(self.slot_start)
        out = []
        for i, sl in enumerate(slots):
            end = self.slot_start[slots[i + 1]] if i + 1 < len(slots) else self.clock.now + 1
            ratio = stats.ratio(self.slot_start[sl], end)
            out.append(None if ratio is None else round(ratio, 6))
        return out

    def build_report(self, status: str, verdict: Optional[str], witness: Dict[str, Any]) -> RunReport:
        sc = self.scenario
        L = self.params.L
        outcomes = slot_outcomes(L, self.leaders, self.blocks)
        reduced = reduced_string(outcomes)
        properties: Dict[str, Any] = {}
        if sc.checks.enabled:
            trace = RunTrace(self.snapshots, self.adversarial)
            k, s, tau, mu = sc.check_k(), sc.check_s(), sc.check_tau(), sc.check_mu()
            for rep in (check_cp(trace, k), check_cg(trace, tau, s), check_cg2(trace, tau, s),
                        check_cq(trace, mu, k), check_ecq(trace, s)):
                properties[rep.prop] = rep.to_dict()
                if rep.violations:
                    logger.warning(f"{rep.prop}: {len(rep.violations)} violações")
        if status == "clean":
            broken = sorted({VERDICTS[name] for name, p in properties.items() if p["violations"]})
            if broken:
                status = "violation"
                verdict = "Abort simulation: " + "; ".join(broken)
        try:
            bounds = bounds_row(sc.bound_params(self.oracle.queries))
        except (ValueError, ZeroDivisionError, OverflowError) as e:
            bounds = {"error": str(e)}
        chain = self.final_chain()
        final = {"length": 0, "tip": None, "blocks": []}
        if chain is not None:
            final = {"length": len(chain), "tip": chain.tip_hash,
                     "blocks": [[creator, sl] for creator, sl in chain.summary()]}
        creators: Dict[str, int] = {pid: 0 for pid in self.parties}
        for block in self.blocks.values():
            creators[block.creator] = creators.get(block.creator, 0) + 1
        sent, on_time = self.networks["bc"].stats.totals()
        rules = self.ctx.rules
        return RunReport(
            seed=sc.seed,
            status=status,
            verdict=verdict,
            scenario=sc.to_dict(),
            slots=L,
            ticks=self.clock.now,
            characteristic_string=str(characteristic_string(outcomes)),
            reduced_string=str(reduced),
            divergence=divergence(reduced) if len(reduced) <= DIVERGENCE_REPORT_LIMIT else None,
            properties=properties,
            eta_per_round=self._eta_per_round(),
            leader_rate={pid: round(len(p.leader_slots) / L, 6) for pid, p in self.parties.items()},
            blocks_per_party=creators,
            nonempty_rate=round(sum(1 for sl in self.leaders if sl <= L) / L, 6),
            round_lengths={str(ep): min(values) for ep, values in sorted(self.epoch_rounds.items())},
            bounds=bounds,
            final_chain=final,
            delivery={"copies": sent, "on_time": on_time},
            rejections=dict(sorted(rules.rejections.items())) if rules is not None else {},
            witness=witness,
            truncated=self.truncated,
        )


# ----------------------------------------------------------------------
# API de alto nível
# ----------------------------------------------------------------------
def run(scenario: Scenario) -> RunReport:
    return Simulation(scenario).run()


def save_run(report: RunReport, events: Sequence[Dict[str, Any]], out_dir: Path,
             txt: bool = False, pdf: bool = False) -> Dict[str, Path]:
    """Grava report.json, trace.jsonl e metrics.csv (e opcionalmente TXT/PDF)."""
    out_dir = Path(out_dir)
    data = report.to_dict()
    paths = {
        "report": write_report_json(data, out_dir / "report.json"),
        "trace": write_trace_jsonl(events, out_dir / "trace.jsonl"),
        "metrics": write_metrics_csv(data, out_dir / "metrics.csv"),
    }
    if txt:
        paths["txt"] = report_to_txt(data, out_dir / "report.txt")
    if pdf:
        paths["pdf"] = report_to_pdf(data, out_dir / "report.pdf")
    return paths


def run_to_dir(scenario: Scenario, out_dir: Path, txt: bool = False, pdf: bool = False) -> RunReport:
    sim = Simulation(scenario)
    report = sim.run()
    save_run(report, sim.events, out_dir, txt=txt, pdf=pdf)
    return report


SWEEP_COLUMNS = ("axis", "value", "seed", "status", "exit_code", "violations", "blocks", "nonempty_rate", "error")


def _sweep_cell(data: Dict[str, Any], axis: str, value: Any) -> Dict[str, Any]:
    row: Dict[str, Any] = {"axis": axis, "value": value, "seed": data.get("seed"), "error": None}
    try:
        scenario = Scenario.from_dict({**data, axis: value, "trace": False})
        report = Simulation(scenario).run()
    except Exception as e:  # a célula registra o erro e a varredura continua
        row.update(status="error", exit_code=1, violations=None, blocks=None, nonempty_rate=None,
                   error=f"{type(e).__name__}: {e}", report=None)
        return row
    row.update(status=report.status, exit_code=report.exit_code, violations=report.violation_count,
               blocks=report.final_chain["length"], nonempty_rate=report.nonempty_rate,
               report=report.to_dict())
    return row


def sweep(base: Scenario, axis: str, values: Sequence[Any], out_dir: Optional[Path] = None,
          n_jobs: int = 1, progress: bool = False) -> List[Dict[str, Any]]:
    """Uma execução por valor do eixo; erros por célula são registrados.

    Raises:
        ConfigError: se o eixo não for um campo do cenário
    """
    data = base.to_dict()
    if axis not in data:
        raise ConfigError(f"Eixo desconhecido: {axis}")
    values = list(values)
    iterator = values
    if progress and tqdm is not None:
        iterator = tqdm(values, desc=f"Varredura {axis}")
    rows = joblib.Parallel(n_jobs=n_jobs)(joblib.delayed(_sweep_cell)(data, axis, v) for v in iterator)
    for row in rows:
        if row["error"]:
            logger.warning(f"Célula {axis}={row['value']} falhou: {row['error']}")
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_table(rows, out_dir / "sweep.csv", columns=SWEEP_COLUMNS)
        out_dir.mkdir(parents=True, exist_ok=True)
        joblib.dump([row.get("report") for row in rows], out_dir / "sweep_reports.joblib")
        logger.info(f"Varredura salva em {out_dir}")
    return rows
