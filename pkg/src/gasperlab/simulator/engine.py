"""Discrete-event simulation of validators running Gasper over a lossy clock.

Time is measured in slots. Every validator keeps its own view. A message
sent at intended time t leaves at t + X and reaches each recipient at
t + X + a + Y, with X drawn once per message and Y once per recipient.
A god's-eye network view receives every message the moment it is sent.
"""

from __future__ import annotations

import heapq
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..chain_store import Block, DerivedCache, Message, ValidatorSet, View, make_block
from ..committees import proposer, slot_committee
from ..ffg import finalized_depths, highest_pair, justified, make_attestation
from ..fork_choice import hlmd
from ..slashing import detect


@dataclass
class NetworkParams:
    a: float = 0.0
    eps1: float = 0.0
    eps2: float = 0.0

    def __post_init__(self):
        for name in ("a", "eps1", "eps2"):
            if getattr(self, name) < 0:
                raise ValueError(f"network parameter {name} must be nonnegative")


@dataclass
class SimConfig:
    validator_count: int = 16
    slots_per_epoch: int = 4
    stakes: Optional[tuple] = None
    byz_count: int = 0
    strategy: str = "withhold"
    smoke_vote_time: float = 0.2
    smoke_fake_timestamp: float = 0.5
    smoke_slots: str = "first"
    network: NetworkParams = field(default_factory=NetworkParams)
    epochs: int = 4
    inclusion_delay: int = 1
    consideration_delay: bool = False
    honor_timestamps: bool = True
    stale_epochs: Optional[int] = None
    shuffle_seed: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.network, dict):
            self.network = NetworkParams(**self.network)
        if self.stakes is not None:
            self.stakes = tuple(float(s) for s in self.stakes)
        self.validate()

    def validate(self) -> None:
        n, c = self.validator_count, self.slots_per_epoch
        if n < 1 or c < 1:
            raise ValueError("validator_count and slots_per_epoch must be positive")
        if n % c:
            raise ValueError(f"slots_per_epoch {c} must divide validator_count {n}")
        if not 0 <= self.byz_count <= n:
            raise ValueError("byz_count must lie in [0, validator_count]")
        if self.stakes is not None and len(self.stakes) != n:
            raise ValueError("stakes must list one entry per validator")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.inclusion_delay < 1:
            raise ValueError("inclusion_delay must be at least 1 slot")
        if self.strategy not in STRATEGY_NAMES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.smoke_slots not in ("first", "all"):
            raise ValueError("smoke_slots must be 'first' or 'all'")
        if not 0 <= self.smoke_vote_time <= 1 or not 0 <= self.smoke_fake_timestamp <= 1:
            raise ValueError("smoke timings must lie in [0, 1]")
        if self.stale_epochs is not None and self.stale_epochs < 0:
            raise ValueError("stale_epochs must be nonnegative")

    @property
    def committee_seed(self) -> int:
        return self.seed if self.shuffle_seed is None else self.shuffle_seed

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stakes"] = list(self.stakes) if self.stakes is not None else None
        return d


STRATEGY_NAMES = ("withhold", "fork_builder", "smoke_bomb", "chaos")

# Event priorities break ties at equal times: deliveries land before the
# epoch-boundary check, which runs before anyone acts.
DELIVER, CHECK, PROPOSE, ATTEST, BYZ = 0, 1, 2, 3, 4


@dataclass
class SimTrace:
    config: SimConfig
    byzantine: list
    events: list
    metrics: list
    views: dict
    network_view: View

    @property
    def honest(self) -> list:
        bad = set(self.byzantine)
        return [v for v in range(self.config.validator_count) if v not in bad]

    def honest_attestations(self) -> list:
        bad = set(self.byzantine)
        return [a for a in self.network_view.attestations.values() if a.author not in bad]

    def slot_vote_shares(self) -> dict[int, float]:
        """Per slot, the largest fraction of committee stake behind a single head vote."""
        cfg = self.config
        stakes = self.network_view.validators.stakes
        voters: dict[int, dict[str, set]] = {}
        for a in self.network_view.attestations.values():
            voters.setdefault(a.slot, {}).setdefault(a.ghost_vote, set()).add(a.author)
        out = {}
        for slot in sorted(voters):
            members = slot_committee(cfg.committee_seed, slot, cfg.validator_count, cfg.slots_per_epoch)
            total = sum(stakes[m] for m in members)
            out[slot] = max(sum(stakes[v] for v in vs) for vs in voters[slot].values()) / total
        return out

    def honest_evidence(self) -> list:
        bad = set(self.byzantine)
        evidence, _ = detect(self.network_view)
        return [e for e in evidence if e.author not in bad]


class Simulation:
    """Stateful engine; ``run`` wraps it for the common one-shot case."""

    def __init__(self, config: SimConfig, byzantine: Optional[list] = None):
        from .strategies import make_strategy

        self.config = config
        n, C = config.validator_count, config.slots_per_epoch
        self.C = C
        self.rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
        stakes = config.stakes if config.stakes is not None else (1.0,) * n
        self.validators = ValidatorSet(stakes)
        if byzantine is None:
            pick = self.rng.choice(n, size=config.byz_count, replace=False) if config.byz_count else []
            byzantine = sorted(int(v) for v in pick)
        self.byzantine = sorted(byzantine)
        self._bad = set(self.byzantine)
        self.cache = DerivedCache(C, self.validators)
        self.views = {
            v: View(C, self.validators, clock=0.0, honor_timestamps=config.honor_timestamps, cache=self.cache)
            for v in range(n)
            if v not in self._bad
        }
        self.network_view = View(C, self.validators, honor_timestamps=False, cache=self.cache)
        self.network = config.network
        self.strategy = make_strategy(config)
        self.queue: list = []
        self.seq = 0
        self.events: list = []
        self.metrics: list = []
        self.next_slot = 0
        self.now = 0.0
        # partially sent messages that the first honest recipient still has to gossip on
        self.relay_pending: set[str] = set()
        # when set, slots assigned to byzantine proposers go to an honest committee member
        self.honest_stand_in = False

    # -- plumbing -------------------------------------------------------

    def is_honest(self, v: int) -> bool:
        return v not in self._bad

    def push(self, t: float, prio: int, action, *args) -> None:
        self.seq += 1
        heapq.heappush(self.queue, (t, prio, self.seq, action, args))

    def log(self, kind: str, **fields) -> None:
        entry = {"t": self.now, "kind": kind}
        entry.update(fields)
        self.events.append(entry)

    def jitter(self) -> float:
        e = self.network.eps1
        return float(self.rng.uniform(-e, e)) if e else 0.0

    def broadcast(self, sender: Optional[int], msg: Message, recipients=None, extra_delay: float = 0.0) -> None:
        """Publish a message: the network view gets it now, each recipient later."""
        self.network_view.deliver(msg)
        targets = sorted(self.views) if recipients is None else sorted(r for r in recipients if r in self.views)
        targets = [r for r in targets if r != sender]
        if recipients is not None and set(targets) | {sender} < set(self.views) | {sender}:
            self.relay_pending.add(msg.id)
        if not targets:
            return
        net = self.network
        ys = self.rng.uniform(-net.eps2, net.eps2, size=len(targets)) if net.eps2 else np.zeros(len(targets))
        for r, y in zip(targets, ys):
            t = max(self.now, self.now + extra_delay + net.a + float(y))
            self.push(t, DELIVER, self._deliver, r, msg)

    def _deliver(self, r: int, msg: Message) -> None:
        view = self.views[r]
        view.advance_clock(self.now)
        view.deliver(msg)
        if msg.id in self.relay_pending:
            # honest validators gossip what they receive, so partial sends still spread
            self.relay_pending.discard(msg.id)
            self.log("relay", validator=r, msg=msg.id)
            self.broadcast(r, msg)

    def own(self, v: int, msg: Message) -> None:
        view = self.views[v]
        view.advance_clock(self.now)
        if msg.id not in view:
            view._offer(msg)  # a sender never waits on its own timestamp

    # -- honest behavior ------------------------------------------------

    def eligible_attestations(self, view: View, head: str, slot: int) -> list[str]:
        done = view.included(head)
        cutoff = slot - self.config.inclusion_delay
        return [a for a in view.order if a in view.attestations and a not in done
                and view.attestations[a].slot <= cutoff]

    def honest_block(self, view: View, v: int, slot: int) -> Optional[Block]:
        head = hlmd(view)
        if view.blocks[head].slot >= slot:
            return None
        return make_block(slot, head, self.eligible_attestations(view, head, slot), v)

    def _propose(self, v: int, slot: int) -> None:
        view = self.views[v]
        view.advance_clock(self.now)
        block = self.honest_block(view, v, slot)
        if block is None:
            self.log("skip", slot=slot, validator=v)
            return
        self.own(v, block)
        self.log("propose", slot=slot, validator=v, block=block.id, parent=block.parent,
                 atts=len(block.newattests))
        self.broadcast(v, block)

    def attestation_filters(self, slot: int) -> dict:
        f = {}
        if self.config.consideration_delay:
            f["max_att_slot"] = slot - 1
        if self.config.stale_epochs is not None:
            f["min_att_epoch"] = slot // self.C - self.config.stale_epochs
        return f

    def _attest(self, v: int, slot: int) -> None:
        view = self.views[v]
        view.advance_clock(self.now)
        att = make_attestation(view, v, slot, **self.attestation_filters(slot))
        self.own(v, att)
        self.log("attest", slot=slot, validator=v, att=att.id, vote=att.ghost_vote,
                 source=str(att.source), target=str(att.target))
        self.broadcast(v, att)

    # -- scheduling -----------------------------------------------------

    def committee(self, slot: int) -> list[int]:
        cfg = self.config
        return slot_committee(cfg.committee_seed, slot, cfg.validator_count, self.C)

    def proposer(self, slot: int) -> int:
        cfg = self.config
        return proposer(cfg.committee_seed, slot, cfg.validator_count, self.C)

    def _clamp(self, slot: int, t: float) -> float:
        return min(max(t, float(slot)), slot + 1 - 1e-9)

    def schedule_slot(self, slot: int) -> None:
        if slot % self.C == 0 and slot > 0:
            self.push(float(slot), CHECK, self._epoch_end, slot // self.C - 1)
        if slot > 0:
            p = self.proposer(slot)
            if not self.is_honest(p) and self.honest_stand_in:
                p = next((v for v in self.committee(slot) if self.is_honest(v)), min(self.views))
            if self.is_honest(p):
                self.push(self._clamp(slot, slot + self.jitter()), PROPOSE, self._propose, p, slot)
            else:
                self.push(float(slot), BYZ, self.strategy.propose, self, p, slot)
        for v in self.committee(slot):
            if self.is_honest(v):
                self.push(self._clamp(slot, slot + 0.5 + self.jitter()), ATTEST, self._attest, v, slot)
            else:
                t = self.strategy.attest_time(self, v, slot)
                self.push(t, BYZ, self.strategy.attest, self, v, slot)

    def process_until(self, t: float, prio: int) -> None:
        while self.queue and (self.queue[0][0], self.queue[0][1]) < (t, prio):
            tt, _, _, action, args = heapq.heappop(self.queue)
            self.now = tt
            action(*args)

    def step(self, slot: int) -> None:
        self.schedule_slot(slot)
        self.process_until(slot + 1.0, PROPOSE)

    def run_epochs(self, k: int) -> None:
        stop = self.next_slot + k * self.C
        for slot in range(self.next_slot, stop):
            self.step(slot)
        self.next_slot = stop
        if stop % self.C == 0 and stop > 0:
            # close the last epoch now instead of waiting for the next slot
            self.push(float(stop), CHECK, self._epoch_end, stop // self.C - 1)
            self.process_until(float(stop), PROPOSE)
            self._closed = stop

    def _epoch_end(self, epoch: int) -> None:
        if getattr(self, "_closed", None) == self.now:
            return
        self._closed = self.now
        nw = self.network_view
        js = justified(nw)
        fin = finalized_depths(nw, js)
        top_j, _ = highest_pair(js)
        top_f, _ = highest_pair(fin)
        honest_views = [self.views[v] for v in sorted(self.views)]
        agree = len({frozenset(v.order) for v in honest_views}) <= 1
        bad = self._bad
        evidence, _ = detect(nw)
        self.metrics.append({
            "epoch": epoch,
            "time": self.now,
            "blocks": len(nw.blocks),
            "attestations": len(nw.attestations),
            "justified": len(js),
            "finalized": len(fin),
            "max_justified_aep": top_j.aep,
            "max_finalized_aep": top_f.aep,
            "finalized_k1": sum(1 for k in fin.values() if k == 1),
            "views_agree": agree,
            "honest_evidence": sum(1 for e in evidence if e.author not in bad),
            "evidence": len(evidence),
        })

    def trace(self) -> SimTrace:
        return SimTrace(self.config, list(self.byzantine), self.events, self.metrics,
                        self.views, self.network_view)


def run(config: SimConfig) -> SimTrace:
    sim = Simulation(config)
    sim.run_epochs(config.epochs)
    return sim.trace()
