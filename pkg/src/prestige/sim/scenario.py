"""Build a cluster from a ``ScenarioConfig``, run it and summarise the result."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..crypto import HashPuzzle, Keyring
from ..node import ProtocolParams
from ..replication import CLIENT_ID_BASE, Client
from ..server import ActiveServer
from . import metrics as mx
from .audit import AuditReport, audit_run
from .baseline import PassiveServer
from .config import ScenarioConfig
from .engine import Network, NetworkModel, Simulator
from .faults import Collusion, FaultProfile, FaultStrategy
from .registry import Registry


@dataclass
class RunResult:
    config: ScenarioConfig
    seed: int
    metrics: dict
    trace: list[dict]
    registry: Registry
    keyring: Keyring
    servers: list
    clients: list
    network: Network
    timeline: list[dict] = field(default_factory=list)
    throughput: list[int] = field(default_factory=list)
    audit: AuditReport | None = None

    @property
    def faulty_ids(self) -> list[int]:
        return self.config.resolved_faulty_ids()

    def final_chain(self) -> list:
        """Oldest-first vcBlock chain of the correct server with the highest view."""
        best = max((s for s in self.servers if s.correct), key=lambda s: (s.ledger.head_vc_block().v, -s.id))
        return list(reversed(best.ledger.vc_chain()))


def _fault_profiles(cfg: ScenarioConfig, sim: Simulator) -> dict[int, FaultProfile]:
    faulty = cfg.resolved_faulty_ids()
    if not faulty:
        return {}
    collusion = Collusion(frozenset(faulty), cfg.gamma, cfg.attack_policy)
    victims: list[int | None] = [None] * len(faulty)
    if cfg.fault_strategy is FaultStrategy.F1:
        correct = [i for i in range(cfg.n) if i not in faulty]
        victims = sim.derived_rng("victims").sample(correct, len(faulty))
    return {sid: FaultProfile(cfg.fault_strategy, victim, collusion) for sid, victim in zip(faulty, victims)}


def build(cfg: ScenarioConfig, seed: int):
    sim = Simulator(seed)
    net = Network(sim, NetworkModel(cfg.delay_mean, cfg.delay_jitter, cfg.delta, min(1.0, cfg.delay_mean),
                                    cfg.gst, cfg.surge_prob, cfg.surge_factor))
    client_ids = [CLIENT_ID_BASE + i for i in range(cfg.clients)]
    keyring = Keyring.generate(list(range(cfg.n)) + client_ids, seed)
    profiles = _fault_profiles(cfg, sim)
    correct_ids = [i for i in range(cfg.n) if i not in profiles]
    genesis_leader = 1 % cfg.n if cfg.protocol == "passive" else 0
    sim.registry = Registry(sim, cfg.n, correct_ids, genesis_leader)
    params = ProtocolParams(
        timeout_lo=cfg.timeout_lo, epsilon=cfg.epsilon, batch_size=cfg.batch_size,
        batch_wait=cfg.effective_batch_wait, c_delta=cfg.c_delta, refresh_threshold=cfg.refresh_threshold,
        rotation_ms=cfg.rotation_s * 1000 if cfg.rotation_s else None, policy_slack=cfg.policy_slack,
        max_campaign_retries=cfg.max_campaign_retries, crash_leaders=cfg.crash_leaders,
        proc_ms_per_msg=cfg.proc_ms_per_msg, proc_ms_per_tx=cfg.proc_ms_per_tx,
    )
    servers = []
    for sid in range(cfg.n):
        puzzle = HashPuzzle(cfg.puzzle_bits, cfg.puzzle_mode, cfg.hash_rate)
        fault = profiles.get(sid, FaultProfile())
        if cfg.protocol == "active":
            srv = ActiveServer(sid, cfg.n, sim, net, keyring, puzzle, params, fault, genesis_leader)
        else:
            rot = cfg.passive_rotation_s * 1000 if cfg.passive_rotation_s else None
            srv = PassiveServer(sid, cfg.n, sim, net, keyring, puzzle, params, fault, genesis_leader,
                                passive_timeout=cfg.passive_timeout, rotation_ms=rot)
        servers.append(srv)
    faulty = sorted(profiles)
    clients = []
    for i, cid in enumerate(client_ids):
        # faulty clients send complaints only to faulty servers
        complain_to = tuple(faulty) if i < cfg.faulty_clients else None
        clients.append(Client(cid, cfg.n, sim, net, keyring, cfg.effective_client_timeout, cfg.think_ms,
                              complain_to=complain_to))
    return sim, net, keyring, servers, clients, correct_ids, genesis_leader


def run_scenario(cfg: ScenarioConfig, seed: int | None = None, audit: bool = True) -> RunResult:
    seed = cfg.seed if seed is None else seed
    sim, net, keyring, servers, clients, correct_ids, genesis_leader = build(cfg, seed)
    for s in servers:
        s.start()
    for c in clients:
        c.start()
    duration = cfg.duration_s * 1000.0
    sim.run(duration)
    registry = sim.registry
    correct = frozenset(correct_ids)
    timeline = mx.view_timeline(sim.trace, correct, duration, genesis_leader)
    productive = mx.productive_views(registry)
    series = mx.throughput_series(registry, duration)
    latencies = [x for c in clients for x in c.latencies]
    result = RunResult(cfg, seed, {}, sim.trace, registry, keyring, servers, clients, net, timeline, series)
    chain = result.final_chain()
    result.metrics = {
        "protocol": cfg.protocol,
        "n": cfg.n,
        "seed": seed,
        "fault_strategy": cfg.fault_strategy.value,
        "faulty_ids": result.faulty_ids,
        "duration_s": cfg.duration_s,
        "committed_tx": sum(series),
        "throughput_mean": sum(series) / cfg.duration_s,
        "throughput_series": series,
        "latency": mx.latency_summary(latencies),
        "availability": mx.availability(timeline, productive, duration),
        "view_change_count": len(timeline) - 1,
        "split_vote_count": mx.split_votes(sim.trace, correct),
        "leaders": {str(v["view"]): v["leader"] for v in timeline},
        "faulty_led_views": len(mx.faulty_led_views(timeline, result.faulty_ids)),
        "rp_trace": mx.rp_trace(chain),
        "messages": mx.message_counts(net),
        "height": max(s.ledger.height for s in servers if s.correct),
        "events": sim.events_processed,
    }
    if audit:
        result.audit = audit_run(result)
        result.metrics["audit"] = result.audit.to_dict()
        result.metrics["audit_ok"] = result.audit.ok
    return result


def _split_vote_trial(cfg: ScenarioConfig, seed: int, horizon_ms: float) -> dict:
    """One view change forced by crashing the genesis leader before any traffic."""
    sim, net, _, servers, clients, correct_ids, genesis_leader = build(cfg, seed)
    for s in servers:
        s.start()
    servers[genesis_leader].suspended = True
    for c in clients:
        c.start()
    elected: list = []
    t = 0.0
    # stop at the first election; later traffic cannot change the count
    while not elected and t < horizon_ms:
        t += 250.0
        sim.run(t)
        elected = [ev for ev in sim.trace if ev["kind"] == "elected"]
    correct = frozenset(i for i in correct_ids if i != genesis_leader)
    return {"seed": seed, "split_votes": mx.split_votes(sim.trace, correct), "elected": bool(elected),
            "confvc": sum(1 for ev in sim.trace if ev["kind"] == "confvc")}


def _trial_args(args):
    return _split_vote_trial(*args)


def split_vote_study(n: int = 4, epsilon: float = 50.0, trials: int = 1000, seed: int = 1,
                     attack: bool = False, jobs: int = 1, horizon_s: float = 20.0) -> dict:
    """Count split votes over ``trials`` independent leader-crash view changes.

    Each trial is a fresh cluster, so stored penalties never accumulate
    across view changes and every trial starts from identical reputations.
    With ``attack`` the faulty servers mimic victims' timeout draws (F1).
    """
    f = (n - 1) // 3
    cfg = ScenarioConfig(n=n, epsilon=epsilon, clients=1, client_timeout=100.0, duration_s=horizon_s,
                         f_actual=f if attack else 0,
                         fault_strategy=FaultStrategy.F1 if attack else FaultStrategy.NONE)
    work = [(cfg, seed * 100_003 + i, horizon_s * 1000.0) for i in range(trials)]
    if jobs > 1:
        from multiprocessing import Pool
        with Pool(jobs) as pool:
            rows = pool.map(_trial_args, work, chunksize=max(1, trials // (jobs * 4)))
    else:
        rows = [_trial_args(w) for w in work]
    return {
        "n": n, "epsilon": epsilon, "attack": attack, "trials": trials,
        "view_changes": sum(r["elected"] for r in rows),
        "split_votes": sum(r["split_votes"] for r in rows),
    }
