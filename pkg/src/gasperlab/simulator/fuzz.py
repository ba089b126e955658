"""Randomized property checks built on the simulator.

``fuzz_plausible_liveness`` drives validators through an adversarial
prefix, then lets the honest ones continue with perfect synchrony and
checks that a new pair is 1-finalized within two epochs.
``fuzz_conflicting_finality`` grows adversarial views with competing
branches and checks that any conflicting finalization comes with at least a
third of the stake provably slashable.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..chain_store import GENESIS_ID, ValidatorSet, View, make_attestation_msg, make_block
from ..ffg import finalization_witnesses, finalized, justified
from ..slashing import Violation, detect
from .engine import NetworkParams, SimConfig, Simulation
from .strategies import Withhold

STRATEGIES = ("chaos", "fork_builder", "smoke_bomb", "withhold")


def case_rng(seed: int, index: int, salt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, salt, index]))


def random_stakes(rng: np.random.Generator, n: int) -> Optional[tuple]:
    if rng.random() < 0.5:
        return None
    raw = rng.uniform(0.2, 2.0, size=n)
    stakes = raw * n / raw.sum()
    stakes[-1] = n - stakes[:-1].sum()
    return tuple(float(s) for s in stakes)


def byzantine_below_third(rng: np.random.Generator, stakes: Optional[tuple], n: int) -> list[int]:
    """A random validator set holding strictly less than a third of the stake."""
    w = np.ones(n) if stakes is None else np.asarray(stakes)
    order = rng.permutation(n)
    want = int(rng.integers(0, n // 3 + 1))
    picked: list[int] = []
    total = 0.0
    for v in order:
        if len(picked) >= want:
            break
        if 3 * (total + w[v]) < n:
            picked.append(int(v))
            total += w[v]
    return sorted(picked)


@dataclass
class LivenessCase:
    index: int
    ok: bool
    reason: str
    honest_attestations: int
    honest_evidence: int
    pre_epochs: int
    strategy: str


@dataclass
class LivenessReport:
    seed: int
    cases: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [c for c in self.cases if not c.ok]

    @property
    def honest_attestations(self) -> int:
        return sum(c.honest_attestations for c in self.cases)

    @property
    def honest_evidence(self) -> int:
        return sum(c.honest_evidence for c in self.cases)


def liveness_case_config(seed: int, index: int) -> tuple[SimConfig, list[int], int]:
    rng = case_rng(seed, index, 61)
    C = int(rng.choice([2, 4]))
    n = C * int(rng.integers(3, 7))
    stakes = random_stakes(rng, n)
    byz = byzantine_below_third(rng, stakes, n)
    cfg = SimConfig(
        validator_count=n,
        slots_per_epoch=C,
        stakes=stakes,
        byz_count=len(byz),
        strategy=str(rng.choice(STRATEGIES)),
        smoke_vote_time=float(rng.uniform(0.1, 0.5)),
        network=NetworkParams(
            a=float(rng.uniform(0, 1.5)), eps1=float(rng.uniform(0, 0.3)), eps2=float(rng.uniform(0, 0.6))
        ),
        inclusion_delay=int(rng.choice([1, 1, 2])),
        consideration_delay=bool(rng.random() < 0.3),
        honor_timestamps=bool(rng.random() < 0.7),
        seed=int(rng.integers(2**31)),
    )
    pre_epochs = int(rng.integers(0, 4))
    return cfg, byz, pre_epochs


def run_liveness_case(seed: int, index: int) -> LivenessCase:
    cfg, byz, pre = liveness_case_config(seed, index)
    sim = Simulation(cfg, byzantine=byz)
    sim.run_epochs(pre)
    # switch to the honest, perfectly synchronous continuation
    start = float(sim.next_slot)
    sim.config = dataclasses.replace(cfg, network=NetworkParams(), inclusion_delay=1)
    sim.network = sim.config.network
    sim.strategy = Withhold()
    sim.honest_stand_in = True
    nw = sim.network_view
    sim.now = start
    for view in sim.views.values():
        view.advance_clock(start)
        for mid in nw.order:
            view.deliver(nw.message(mid))
    first_epoch = sim.next_slot // cfg.slots_per_epoch
    sim.run_epochs(2)
    witnesses = finalization_witnesses(nw)
    fresh = [p for p, ks in witnesses.items() if 1 in ks and p.aep >= first_epoch]
    trace = sim.trace()
    honest_atts = len(trace.honest_attestations())
    evidence = len(trace.honest_evidence())
    ok = bool(fresh) and evidence == 0
    reason = "" if ok else ("no new 1-finalized pair" if not fresh else "honest slashing evidence")
    return LivenessCase(index, ok, reason, honest_atts, evidence, pre, cfg.strategy)


def _liveness_chunk(args) -> list[LivenessCase]:
    seed, indices = args
    return [run_liveness_case(seed, i) for i in indices]


def _map_chunks(fn, seed: int, n_cases: int, parallel: int) -> list:
    chunks = [(seed, list(range(i, min(i + 25, n_cases)))) for i in range(0, n_cases, 25)]
    if parallel > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            parts = list(pool.map(fn, chunks))
    else:
        parts = [fn(c) for c in chunks]
    return [case for part in parts for case in part]


def fuzz_plausible_liveness(seed: int, n_cases: int, parallel: int = 1) -> LivenessReport:
    report = LivenessReport(seed)
    report.cases = _map_chunks(_liveness_chunk, seed, n_cases, parallel)
    return report


# -- conflicting finality -------------------------------------------------


@dataclass
class SafetyCase:
    index: int
    ok: bool
    conflicting: bool
    slashable: float
    total: float
    same_epoch_justified: bool
    messages: int


@dataclass
class SafetyReport:
    seed: int
    cases: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [c for c in self.cases if not c.ok]

    @property
    def conflicting(self) -> int:
        return sum(c.conflicting for c in self.cases)


def adversarial_view(seed: int, index: int) -> tuple[View, list]:
    """Competing branches voted on by overlapping random validator subsets."""
    rng = case_rng(seed, index, 83)
    C = int(rng.integers(2, 5))
    n = int(rng.integers(4, 13))
    stakes = random_stakes(rng, n)
    vals = ValidatorSet(stakes if stakes is not None else (1.0,) * n)
    scratch = View(C, vals)
    epochs = int(rng.integers(3, 8))
    branches = int(rng.integers(2, 4))
    fork_epoch = int(rng.integers(0, 3))
    msgs = []

    def add(msg):
        scratch.deliver(msg)
        msgs.append(msg)

    trunk = GENESIS_ID
    for e in range(1, fork_epoch + 1):
        blk = make_block(e * C - int(rng.integers(0, C)), trunk, payload=b"trunk")
        add(blk)
        trunk = blk.id
    tips = {b: trunk for b in range(branches)}
    for e in range(max(1, fork_epoch), epochs + 1):
        for b in range(branches):
            if rng.random() < 0.85:
                slot = e * C - int(rng.integers(0, C))
                if scratch.blocks[tips[b]].slot < slot:
                    blk = make_block(slot, tips[b], payload=f"br{b}".encode())
                    add(blk)
                    tips[b] = blk.id
        for b in range(branches):
            q = rng.uniform(0.4, 1.0)
            voters = [v for v in range(n) if rng.random() < q]
            target = scratch.ebb(tips[b], e)
            onchain = set(scratch.chain(target.block))
            cands = sorted((p for p in justified(scratch) if p.block in onchain and p.aep < e),
                           key=lambda p: p.key())
            if not cands:
                continue
            for v in voters:
                src = cands[-1] if rng.random() < 0.6 else cands[int(rng.integers(len(cands)))]
                slot = e * C + int(rng.integers(0, C))
                vote = tips[b] if scratch.blocks[tips[b]].slot <= slot else target.block
                add(make_attestation_msg(v, slot, vote, src, target))
    order = rng.permutation(len(msgs))
    view = View(C, vals)
    for i in order:
        view.deliver(msgs[int(i)])
    return view, msgs


def check_safety_case(seed: int, index: int) -> SafetyCase:
    view, msgs = adversarial_view(seed, index)
    fin = sorted(finalized(view), key=lambda p: p.key())
    conflicting = any(
        view.conflicts(a.block, b.block) for i, a in enumerate(fin) for b in fin[i + 1:]
    )
    evidence, _ = detect(view)
    slashable = view.validators.weight(e.author for e in evidence if e.kind != Violation.DOUBLE_PROPOSAL)
    js = justified(view)
    epochs = [p.aep for p in js]
    same_epoch = len(epochs) != len(set(epochs))
    need = view.total_stake / 3 - 1e-9
    ok = (not conflicting or slashable >= need) and (not same_epoch or slashable >= need)
    return SafetyCase(index, ok, conflicting, slashable, view.total_stake, same_epoch, len(msgs))


def _safety_chunk(args) -> list[SafetyCase]:
    seed, indices = args
    return [check_safety_case(seed, i) for i in indices]


def fuzz_conflicting_finality(seed: int, n_cases: int, parallel: int = 1) -> SafetyReport:
    report = SafetyReport(seed)
    report.cases = _map_chunks(_safety_chunk, seed, n_cases, parallel)
    return report


# -- honest innocence ----------------------------------------------------


@dataclass
class InnocenceRun:
    index: int
    honest_attestations: int
    honest_evidence: int


def innocence_config(seed: int, index: int) -> SimConfig:
    rng = case_rng(seed, index, 97)
    C = int(rng.choice([2, 4, 8]))
    n = C * int(rng.integers(2, 6))
    stakes = random_stakes(rng, n)
    byz = len(byzantine_below_third(rng, stakes, n))
    return SimConfig(
        validator_count=n,
        slots_per_epoch=C,
        stakes=stakes,
        byz_count=byz,
        strategy=str(rng.choice(STRATEGIES)),
        smoke_vote_time=float(rng.uniform(0.1, 0.5)),
        network=NetworkParams(
            a=float(rng.uniform(0, 1.0)), eps1=float(rng.uniform(0, 0.3)), eps2=float(rng.uniform(0, 0.5))
        ),
        epochs=int(rng.integers(3, 9)),
        inclusion_delay=int(rng.choice([1, 1, 2])),
        consideration_delay=bool(rng.random() < 0.3),
        honor_timestamps=bool(rng.random() < 0.7),
        seed=int(rng.integers(2**31)),
    )


def run_innocence(seed: int, index: int) -> InnocenceRun:
    from .engine import run

    trace = run(innocence_config(seed, index))
    return InnocenceRun(index, len(trace.honest_attestations()), len(trace.honest_evidence()))


def _innocence_chunk(args) -> list[InnocenceRun]:
    seed, indices = args
    return [run_innocence(seed, i) for i in indices]


def innocence_sweep(seed: int, n_runs: int, parallel: int = 1) -> list[InnocenceRun]:
    return _map_chunks(_innocence_chunk, seed, n_runs, parallel)
