"""Máquina de estados de uma parte do protocolo.

Funcionalidades:
- Registro em recursos (oráculo, relógio, ledger) e rótulos de disponibilidade
- Inicialização antes do gênese ou entrada tardia via JoinProc
- LedgerMaintenance: uma ativação por tick, executando rounds quando now ≥ t_next
- Pré-espera do líder sem bloco recebido (slot vazio versus slot atrasado)
- Medições AdjustRecord e ajuste da duração de round por época
- Ganchos de comportamento para partes corrompidas
"""
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, List, Optional, Tuple
import logging

from .chain import AdjustRecord, Block, Certificate, Chain, InitFunctionality, Transaction, vrf_input
from .crypto import NONCE, TEST, KesKey, VrfKeypair
from .rules import ChainRules, ChainTooShortError, ResyncNeeded, apply_transactions

logger = logging.getLogger(__name__)

PHASE_IDLE = "idle"
PHASE_GENESIS_WAIT = "genesis_wait"
PHASE_JOINING = "joining"
PHASE_PREWAIT = "prewait"
PHASE_PARKED = "parked"
PHASE_DONE = "done"

RESOURCES = ("ro", "clock", "ledger")
HELLO = "HELLO"


@dataclass
class ProtocolParams:
    """Parâmetros de protocolo compartilhados por todas as partes."""

    R: int
    f: float
    L: int
    t_round_1: int
    t_run: int
    t_start: int = 10
    pre_wait: int = 0
    l_vrf: int = 32
    k: int = 10
    s: int = 10
    omega1: float = 0.3
    omega2: float = 0.1
    t_round_min: int = 1
    t_round_max: int = 10 ** 9
    reject_empty_epochs: bool = True
    selection: str = "bg"

    def __post_init__(self):
        if self.t_run < 1 or self.t_run >= self.t_round_1:
            raise ValueError(f"t_run deve estar em [1, t_round_1): {self.t_run}")
        if self.pre_wait < 0:
            raise ValueError(f"pre_wait deve ser não negativo: {self.pre_wait}")


@dataclass(frozen=True)
class AvailabilityLabel:
    operational: bool
    time_aware: bool
    online: bool
    synchronized: bool

    @property
    def alert(self) -> bool:
        return self.operational and self.online and self.synchronized and self.time_aware


@dataclass
class FetchedInformation:
    txs: List[Transaction]
    chains: List[Tuple[Chain, int]]
    adjust: List[Tuple[AdjustRecord, int]]
    welcome: bool


class ProtocolContext:
    """Recursos compartilhados: relógio, funcionalidades, redes e regras de cadeia."""

    def __init__(self, params: ProtocolParams, clock, oracle, vrf, kes,
                 init: InitFunctionality, networks: Dict[str, Any],
                 trace: Optional[Callable[[Dict[str, Any]], None]] = None):
        self.params = params
        self.clock = clock
        self.oracle = oracle
        self.vrf = vrf
        self.kes = kes
        self.init = init
        self.networks = networks
        self.trace = trace
        self.directory: Dict[str, Tuple[str, str]] = {}
        self.rules: Optional[ChainRules] = None

    def register_keys(self, party: str, v_vrf: str, v_kes: str) -> None:
        self.directory[party] = (v_vrf, v_kes)
        if self.rules is not None:
            self.rules.register_keys(party, v_vrf, v_kes)

    def genesis_chain(self, now: int) -> Chain:
        """Cadeia só com o gênese; cria as regras de cadeia na primeira chamada."""
        genesis = self.init.genesis(now)
        if genesis is None:
            raise RuntimeError(f"Gênese indisponível em now={now}")
        if self.rules is None:
            p = self.params
            self.rules = ChainRules(
                genesis=genesis, R=p.R, f=p.f, l_vrf=p.l_vrf, k=p.k, s=p.s,
                vrf=self.vrf, kes=self.kes, oracle=self.oracle,
                omega1=p.omega1, omega2=p.omega2,
                t_round_min=p.t_round_min, t_round_max=p.t_round_max,
                reject_empty_epochs=p.reject_empty_epochs, selection=p.selection,
                keys=dict(self.directory),
            )
        return Chain(genesis)

    def emit(self, record: Dict[str, Any]) -> None:
        if self.trace is not None:
            self.trace(record)


class PartyBehavior:
    """Comportamento honesto; estratégias adversariais sobrescrevem os ganchos."""

    name = "honest"

    def parent_chain(self, party: "Party", chain: Chain) -> Chain:
        return chain

    def ready_to_forge(self, party: "Party", now: int) -> bool:
        return party.t_rec is not None or now >= party.t_begin + party.params.pre_wait

    def publish(self, party: "Party", chain: Chain) -> None:
        party.ctx.networks["bc"].honest_multicast(party.id, chain, party.t_next)


class Party:
    """Parte do protocolo ativada pelo agendador uma vez por tick."""

    def __init__(self, party_id: str, ctx: ProtocolContext, behavior: Optional[PartyBehavior] = None):
        self.id = party_id
        self.ctx = ctx
        self.params = ctx.params
        self.behavior = behavior or PartyBehavior()
        self.honest = True
        self.registered = {r: False for r in RESOURCES}
        self.online = False
        self.is_init = False
        self.halted = False
        self.vrf_keys: Optional[VrfKeypair] = None
        self.kes_key: Optional[KesKey] = None
        self.chain: Optional[Chain] = None
        self.tx_buffer: List[Transaction] = []
        self.adjust_buffer: List[Tuple[AdjustRecord, int]] = []
        self.s_adj: List[Tuple[int, int, str]] = []
        self.adj: List[AdjustRecord] = []
        self.sl = 0
        self.ep = 0
        self.t_round = self.params.t_round_1
        self.t_run = self.params.t_run
        self.t_begin = 0
        self.t_next = 0
        self.t_now = 0
        self.t_rec: Optional[int] = None
        self.b_last: Optional[str] = None
        self.t_on = 0
        self.phase = PHASE_IDLE
        self.synchronized = False
        self.needs_join = False
        self.stake_view = None
        self.leader_slots: List[int] = []
        self.blocks_issued: List[Tuple[int, str]] = []
        self._leader = None
        self._join_until = 0
        self._join_chains: List[Tuple[Chain, int]] = []
        self._round_chains: List[Tuple[Chain, int]] = []
        self._welcome = False

    # ------------------------------------------------------------------
    # Rótulos
    # ------------------------------------------------------------------
    @property
    def rules(self) -> ChainRules:
        return self.ctx.rules

    @property
    def labels(self) -> AvailabilityLabel:
        return AvailabilityLabel(
            operational=self.registered["ro"],
            time_aware=self.registered["clock"],
            online=self.online,
            synchronized=self.synchronized,
        )

    @property
    def alert(self) -> bool:
        return self.honest and self.labels.alert

    @property
    def active(self) -> bool:
        lab = self.labels
        return (lab.operational and lab.online and lab.time_aware) or not self.honest or not lab.time_aware

    def _trace(self, event: str, **fields) -> None:
        record = {"event": event, "party": self.id, "t": self.t_now}
        record.update(fields)
        self.ctx.emit(record)

    # ------------------------------------------------------------------
    # Registro
    # ------------------------------------------------------------------
    def register(self, resource: str) -> bool:
        """Registra a parte em um recurso; ledger exige registro prévio no oráculo."""
        if resource not in RESOURCES:
            raise ValueError(f"Recurso desconhecido: {resource}")
        if self.registered[resource]:
            return True
        if resource == "ro":
            self.ctx.oracle.register(self.id)
        elif resource == "clock":
            self.ctx.clock.register_party(self.id)
            if not self.honest:
                self.ctx.clock.mark_corrupted(self.id)
        else:
            if not self.registered["ro"]:
                logger.warning(f"{self.id}: registro no ledger antes do oráculo ignorado")
                self._trace("register_ignored", resource=resource)
                return False
            self._join_networks()
            self.is_init = False
        self.registered[resource] = True
        return True

    def _join_networks(self) -> None:
        for net in self.ctx.networks.values():
            net.register(self.id)
        self.online = True

    def deregister(self, resource: str) -> None:
        """Remove a parte de um recurso ("network" desconecta apenas as redes)."""
        if resource == "network":
            for net in self.ctx.networks.values():
                net.deregister(self.id)
            self.online = False
            self.synchronized = False
            self.needs_join = True
            self._trace("offline")
            return
        if resource not in RESOURCES or not self.registered[resource]:
            return
        self.registered[resource] = False
        self.synchronized = False
        if resource == "ro":
            self.ctx.oracle.deregister(self.id)
            self._trace("stalled")
        elif resource == "clock":
            self.ctx.clock.deregister_party(self.id)
        else:
            self.deregister("network")

    def rejoin(self) -> None:
        """Reconecta às redes; a próxima ativação executa JoinProc."""
        if self.registered["ledger"] and not self.online:
            self._join_networks()
            self.needs_join = True
            self._trace("rejoin")

    def corrupt(self, behavior: PartyBehavior) -> None:
        self.honest = False
        self.behavior = behavior
        if self.registered["clock"]:
            self.ctx.clock.mark_corrupted(self.id)
        logger.info(f"{self.id} corrompida ({behavior.name})")
        self._trace("corrupted", strategy=behavior.name)

    # ------------------------------------------------------------------
    # Inicialização e entrada
    # ------------------------------------------------------------------
    def initialize(self, now: int) -> None:
        """Gera chaves; antes do gênese submete-as a F_INIT, depois entra via JoinProc."""
        if self.is_init:
            return
        if self.vrf_keys is None:
            self.vrf_keys = self.ctx.vrf.keygen(self.id)
            self.kes_key = self.ctx.kes.keygen(self.id)
            self.ctx.register_keys(self.id, self.vrf_keys.v_vrf, self.kes_key.v_kes)
        if now < 0:
            self.ctx.init.submit_keys(self.id, self.vrf_keys.v_vrf, self.kes_key.v_kes, now)
            self.t_round = self.params.t_round_1
            self.t_next = 0
            self.sl = 0
            self.phase = PHASE_GENESIS_WAIT
        else:
            if self.chain is None:
                self.chain = self.ctx.genesis_chain(now)
            self.needs_join = True
        self.is_init = True
        self.t_on = self.sl

    def _receive_genesis(self, now: int) -> None:
        self.chain = self.ctx.genesis_chain(now)
        self.phase = PHASE_PARKED
        self.synchronized = True

    def join_proc(self, now: int) -> None:
        """Anuncia HELLO e escuta por 3·t_round_1 ticks."""
        self.needs_join = False
        self.synchronized = False
        self.phase = PHASE_JOINING
        self._join_until = now + 3 * self.params.t_round_1
        self._join_chains = []
        if self.chain is None:
            self.chain = self.ctx.genesis_chain(now)
        self.ctx.networks["join"].honest_multicast(self.id, (HELLO, self.id), self._join_until)
        logger.debug(f"{self.id}: JoinProc até o tick {self._join_until}")
        self._trace("join", until=self._join_until)

    def _continue_join(self, now: int) -> Optional[Tuple[int, int, int]]:
        info = self.fetch_information(now)
        self._merge(info)
        self._join_chains.extend(info.chains)
        if now < self._join_until:
            return None
        self.select_chain(self._join_chains, now)
        self.t_rec = None
        if not self._join_chains and not self.chain.blocks:
            logger.info(f"{self.id}: nenhuma cadeia recebida durante JoinProc; repetindo")
            self.join_proc(now)
            return None
        try:
            sl, t_next, t_round = self.rules.current_slot_number(now, self.chain)
        except ResyncNeeded as e:
            logger.info(f"{self.id}: {e}; repetindo JoinProc")
            self.join_proc(now)
            return None
        self.sl, self.t_next, self.t_round = sl, t_next, t_round
        self.t_begin = t_next - t_round
        self.ep = self.rules.epoch_of(sl)
        self.phase = PHASE_PARKED
        self._trace("joined", sl=sl, t_next=t_next, t_round=t_round)
        return sl, t_round, t_next

    # ------------------------------------------------------------------
    # Ativação
    # ------------------------------------------------------------------
    def maintain(self, now: int) -> None:
        """MAINTAIN-LEDGER: executa o que couber neste tick e reporta t_next ao relógio."""
        if self.halted or not self.registered["clock"]:
            return
        self.t_now = now
        if not self.registered["ledger"] or not self.online:
            self._report()
            return
        if not self.is_init:
            self.initialize(now)
        if self.phase == PHASE_GENESIS_WAIT:
            if now < 0:
                self._report()
                return
            self._receive_genesis(now)
        if not self.registered["ro"]:
            self._listen(now)
            self._report()
            return
        if self.needs_join and self.phase != PHASE_JOINING:
            self.join_proc(now)
        if self.phase == PHASE_JOINING:
            self._continue_join(now)
        if self.phase == PHASE_PREWAIT:
            self._continue_prewait(now)
        while self.phase == PHASE_PARKED and now >= self.t_next:
            self._run_round(now)
        self._report()

    def _report(self) -> None:
        if not self.registered["clock"]:
            return
        value = self.t_next if (self.synchronized or self.phase == PHASE_GENESIS_WAIT) else None
        self.ctx.clock.clock_update(self.id, value)

    def _listen(self, now: int) -> None:
        """Parte parada (sem oráculo): continua recebendo e selecionando cadeias."""
        if self.chain is None:
            return
        info = self.fetch_information(now)
        self._merge(info)
        self.select_chain(info.chains, now)

    def _run_round(self, now: int) -> None:
        self.t_rec = None
        self.b_last = None
        self.adj = []
        self._round_chains = []
        self._welcome = False
        self._gather(now)
        if not self.update_time(now):
            return
        self.update_stake_dist()
        self.staking_procedure(now)
        if self.phase != PHASE_PREWAIT:
            self._close_round(now)

    def _gather(self, now: int) -> None:
        info = self.fetch_information(now)
        self._merge(info)
        self._round_chains.extend(info.chains)
        self._welcome = self._welcome or info.welcome
        self.select_chain(info.chains, now)

    def _close_round(self, now: int) -> None:
        if self._welcome and self.honest:
            self.ctx.networks["bc"].honest_multicast(self.id, self.chain, self.t_next)
            for tx in self.tx_buffer:
                self.ctx.networks["tx"].honest_multicast(self.id, tx, self.t_next)
        self.adjust_delay(now)
        self.ctx.kes.evolve(self.kes_key, self.sl)
        self.finish_round(now)

    def finish_round(self, now: int) -> bool:
        """Estaciona a parte até t_next; retorna True se ainda há espera."""
        self.phase = PHASE_PARKED
        return now < self.t_next

    # ------------------------------------------------------------------
    # Sub-procedimentos
    # ------------------------------------------------------------------
    def fetch_information(self, now: int) -> FetchedInformation:
        nets = self.ctx.networks
        chains = [(p, d) for p, d in nets["bc"].fetch(self.id, now) if isinstance(p, Chain)]
        txs = [p for p, _ in nets["tx"].fetch(self.id, now) if isinstance(p, Transaction)]
        adjust = [(rec, d) for batch, d in nets["adj"].fetch(self.id, now) for rec in batch]
        welcome = any(p[0] == HELLO for p, _ in nets["join"].fetch(self.id, now))
        return FetchedInformation(txs, chains, adjust, welcome)

    def _merge(self, info: FetchedInformation) -> None:
        known = {tx.tx_id for tx in self.tx_buffer}
        for tx in info.txs:
            if tx.tx_id not in known:
                self.tx_buffer.append(tx)
                known.add(tx.tx_id)
        keys = {rec.key for rec, _ in self.adjust_buffer}
        for rec, d in info.adjust:
            if rec.key not in keys:
                self.adjust_buffer.append((rec, d))
                keys.add(rec.key)

    def select_chain(self, chains: List[Tuple[Chain, int]], now: int) -> Chain:
        """Filtra candidatas válidas e aplica a regra de seleção; registra t_rec na troca."""
        if not chains or self.rules is None:
            return self.chain
        valid = []
        arrival: Dict[str, int] = {}
        for chain, d in chains:
            if self.rules.validate(chain, now).ok:
                valid.append(chain)
                arrival.setdefault(chain.tip_hash, d)
        best = self.rules.select(self.chain, valid)
        if best.tip_hash != self.chain.tip_hash:
            self.t_rec = arrival[best.tip_hash]
            self.b_last = best.tip_hash if best.blocks else None
            logger.debug(f"{self.id}: cadeia adotada com {len(best)} blocos (t_rec={self.t_rec})")
            self._trace("adopt", length=len(best), tip=best.tip_hash[:16], t_rec=self.t_rec)
            self.chain = best
        return self.chain

    def update_time(self, now: int) -> bool:
        """UpdateTime; retorna False se a parte terminou ou precisa ressincronizar."""
        R = self.params.R
        if self.t_run + self.t_next > now:
            sl = self.sl + 1
            if sl > self.params.L:
                self.phase = PHASE_DONE
                return False
            self.sl = sl
            if sl > R and (sl - 1) % R == 0:
                ep = self.rules.epoch_of(sl)
                old = self.t_round
                self.t_round = self.rules.round_length(self.chain, ep)
                logger.debug(f"{self.id}: época {ep}, t_round {old} -> {self.t_round}")
                self._trace("epoch", ep=ep, t_round=self.t_round, previous=old)
            self.t_begin = self.t_next
            self.t_next = self.t_begin + self.t_round
            branch = "normal"
        else:
            try:
                sl, t_next, t_round = self.rules.current_slot_number(now, self.chain)
            except ResyncNeeded as e:
                logger.warning(f"{self.id}: ressincronização necessária ({e})")
                self.synchronized = False
                self.needs_join = True
                self.phase = PHASE_IDLE
                return False
            if sl > self.params.L:
                self.phase = PHASE_DONE
                return False
            self.sl, self.t_next, self.t_round = sl, t_next, t_round
            self.t_begin = t_next - t_round
            branch = "resync"
        self.ep = self.rules.epoch_of(self.sl)
        self.synchronized = True
        self.t_on = self.sl
        self._trace("round", sl=self.sl, t_begin=self.t_begin, t_next=self.t_next,
                    t_round=self.t_round, branch=branch)
        return True

    def update_stake_dist(self) -> None:
        try:
            self.stake_view = self.rules.update_stake_dist(self.chain, self.ep)
        except ChainTooShortError as e:
            logger.warning(f"{self.id}: {e}; staking omitido no slot {self.sl}")
            self.stake_view = None

    def staking_procedure(self, now: int) -> Optional[Block]:
        """Avalia a liderança do slot e forja (ou entra em pré-espera) quando líder."""
        if self.stake_view is None:
            return None
        dist, eta = self.stake_view
        rho = self.ctx.vrf.eval(self.vrf_keys, vrf_input(eta, self.sl, NONCE))
        out = self.ctx.vrf.eval(self.vrf_keys, vrf_input(eta, self.sl, TEST))
        if out.y >= self.rules.leader_threshold(dist, self.id):
            return None
        self.leader_slots.append(self.sl)
        self._leader = (rho, out)
        if self.behavior.ready_to_forge(self, now) or now >= self.t_begin + self.t_run:
            return self._lead(now)
        self.phase = PHASE_PREWAIT
        return None

    def _continue_prewait(self, now: int) -> None:
        self._gather(now)
        if self.behavior.ready_to_forge(self, now) or now >= self.t_begin + self.t_run:
            self._lead(now)
            self._close_round(now)

    def _lead(self, now: int) -> Optional[Block]:
        rho, out = self._leader
        self._leader = None
        block = None
        if now < self.t_begin + self.t_run:
            block = self._forge(now, rho, out)
        else:
            logger.debug(f"{self.id}: líder atrasado no slot {self.sl}; apenas evolui a chave KES")
            self._trace("late_leader", sl=self.sl)
        if self.t_rec is not None and self.b_last is not None:
            self.adj.append(AdjustRecord(self.b_last, self.t_rec, self.id, out.y, out.pi, self.sl))
        else:
            self.s_adj.append((self.sl, out.y, out.pi))
        return block

    def _forge(self, now: int, rho, out) -> Block:
        rules = self.rules
        parent = self.behavior.parent_chain(self, self.chain)
        n = len(parent.blocks)
        balances = rules.balances_at(parent, n)
        st: List[Transaction] = []
        ids = set()
        for tx in self.tx_buffer:
            if tx.tx_id in ids or rules.chain_has_tx(parent, tx.tx_id):
                continue
            updated = apply_transactions(balances, [tx])
            if updated is None:
                continue
            balances = updated
            st.append(tx)
            ids.add(tx.tx_id)
        records = []
        keys = set()
        for rec, t_adj in self.adjust_buffer:
            if rec.key not in keys and rules.adjust_record_ok(parent, n, rec, self.sl):
                records.append((rec, t_adj))
                keys.add(rec.key)
        header = Block(
            h=parent.tip_hash, st=tuple(st), sl=self.sl, t_now=now,
            crt=Certificate(self.id, out.y, out.pi), rho=(rho.y, rho.pi), a=tuple(records),
        )
        block = replace(header, sigma=self.ctx.kes.sign(self.kes_key, header.header_bytes(), self.sl))
        self.chain = parent.extend(block)
        rules.index_block(block)
        self.tx_buffer = [tx for tx in self.tx_buffer if tx.tx_id not in ids]
        self.adjust_buffer = [
            (rec, t) for rec, t in self.adjust_buffer
            if rec.key not in keys and not rules.chain_has_adjust(self.chain, rec.key)
        ]
        self.blocks_issued.append((self.sl, block.hash))
        logger.debug(f"{self.id}: bloco emitido no slot {self.sl} (altura {len(self.chain)})")
        self._trace("block", sl=self.sl, height=len(self.chain), hash=block.hash[:16],
                    txs=len(st), adjust=len(records))
        self.behavior.publish(self, self.chain)
        return block

    def adjust_delay(self, now: int) -> None:
        """Completa medições pendentes, descarta as antigas e difunde o lote adj."""
        remaining = []
        for sl_i, y, pi in self.s_adj:
            match = next(((c, d) for c, d in self._round_chains if c.head is not None and c.head.sl == sl_i), None)
            if match is not None:
                self.adj.append(AdjustRecord(match[0].tip_hash, match[1], self.id, y, pi, sl_i))
            elif self.sl - sl_i <= 2:
                remaining.append((sl_i, y, pi))
        self.s_adj = remaining
        if not self.adj:
            return
        batch = tuple(self.adj)
        self.ctx.networks["adj"].honest_multicast(self.id, batch, self.t_next)
        keys = {rec.key for rec, _ in self.adjust_buffer}
        self.adjust_buffer.extend((rec, now) for rec in batch if rec.key not in keys)
        self._trace("adjust", records=len(batch))

    # ------------------------------------------------------------------
    # Interface com o ambiente
    # ------------------------------------------------------------------
    def submit(self, tx: Transaction, now: int) -> bool:
        """SUBMIT: guarda a transação e a difunde na rede tx."""
        if not self.registered["ledger"] or not self.online:
            return False
        if any(t.tx_id == tx.tx_id for t in self.tx_buffer):
            return True
        self.tx_buffer.append(tx)
        deadline = self.t_next if self.synchronized else now + self.params.t_round_1
        self.ctx.networks["tx"].honest_multicast(self.id, tx, deadline)
        return True

    def read_state(self, k: int, now: int) -> List[Tuple[Transaction, ...]]:
        """ReadState: payloads da cadeia local sem os últimos k blocos."""
        if not self.is_init or self.chain is None or self.rules is None:
            return []
        self.t_now = now
        if self.online:
            info = self.fetch_information(now)
            self._merge(info)
            self.select_chain(info.chains, now)
        if self.phase == PHASE_PARKED and self.synchronized and now >= self.t_run + self.t_next:
            try:
                sl, t_next, t_round = self.rules.current_slot_number(now, self.chain)
            except ResyncNeeded:
                pass
            else:
                self.sl, self.t_next, self.t_round = sl, t_next, t_round
                self.t_begin = t_next - t_round
                self.ep = self.rules.epoch_of(sl)
        return [b.st for b in self.chain.truncated(k).blocks]
