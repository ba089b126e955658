"""Byzantine behaviors plugged into the simulation engine.

Byzantine validators collude: they decide using the network view, which
already holds every message anyone has sent.
"""

from __future__ import annotations

from typing import Optional

from ..chain_store import View, make_attestation_msg, make_block
from ..ffg import chain_justified, last_justified, make_attestation
from ..fork_choice import hlmd


class Strategy:
    name = "base"

    def propose(self, sim, v: int, slot: int) -> None:
        pass

    def attest_time(self, sim, v: int, slot: int) -> float:
        return slot + 0.5

    def attest(self, sim, v: int, slot: int) -> None:
        pass


class Withhold(Strategy):
    """Never proposes and never attests."""

    name = "withhold"


def _protocol_attestation(sim, v: int, slot: int):
    return make_attestation(sim.network_view, v, slot, **sim.attestation_filters(slot))


def _fork_pair(sim, v: int, slot: int):
    nw: View = sim.network_view
    head = hlmd(nw)
    if nw.blocks[head].slot >= slot:
        return None
    atts = sim.eligible_attestations(nw, head, slot)
    return [make_block(slot, head, atts, v, payload=f"fork-{i}".encode()) for i in range(2)]


class ForkBuilder(Strategy):
    """Proposes two sibling blocks, each sent to half of the honest validators."""

    name = "fork_builder"

    def propose(self, sim, v, slot):
        pair = _fork_pair(sim, v, slot)
        if pair is None:
            return
        honest = sorted(sim.views)
        halves = (honest[0::2], honest[1::2])
        for blk, half in zip(pair, halves):
            sim.log("propose", slot=slot, validator=v, block=blk.id, parent=blk.parent,
                    atts=len(blk.newattests), byzantine=True)
            sim.broadcast(v, blk, recipients=half)

    def attest(self, sim, v, slot):
        att = _protocol_attestation(sim, v, slot)
        sim.log("attest", slot=slot, validator=v, att=att.id, vote=att.ghost_vote,
                source=str(att.source), target=str(att.target), byzantine=True)
        sim.broadcast(v, att)


class SmokeBomb(Strategy):
    """Split votes across two competing blocks early, claiming a later timestamp."""

    name = "smoke_bomb"

    def __init__(self, vote_time: float, fake_timestamp: float, slots: str = "first"):
        self.vote_time = vote_time
        self.fake_timestamp = fake_timestamp
        self.slots = slots

    def targeted(self, sim, slot: int) -> bool:
        return self.slots == "all" or slot % sim.C == 0

    def propose(self, sim, v, slot):
        if not self.targeted(sim, slot):
            att_head = hlmd(sim.network_view)
            if sim.network_view.blocks[att_head].slot >= slot:
                return
            blk = make_block(slot, att_head, sim.eligible_attestations(sim.network_view, att_head, slot), v)
            sim.log("propose", slot=slot, validator=v, block=blk.id, parent=blk.parent,
                    atts=len(blk.newattests), byzantine=True)
            sim.broadcast(v, blk)
            return
        pair = _fork_pair(sim, v, slot)
        if pair is None:
            return
        for blk in pair:
            sim.log("propose", slot=slot, validator=v, block=blk.id, parent=blk.parent,
                    atts=len(blk.newattests), byzantine=True)
            sim.broadcast(v, blk)

    def attest_time(self, sim, v, slot):
        if self.targeted(sim, slot):
            return slot + self.vote_time
        return slot + 0.5

    def options(self, sim, slot: int) -> list[str]:
        nw = sim.network_view
        here = sorted(b for b, blk in nw.blocks.items() if blk.slot == slot)
        if len(here) >= 2:
            return here[:2]
        # otherwise the two heaviest children of the deepest fork point
        forks = [b for b, kids in nw.children.items() if len(kids) >= 2]
        if not forks:
            return here
        fork = max(forks, key=lambda b: (nw.blocks[b].slot, b))
        return sorted(nw.children[fork])[:2]

    def attest(self, sim, v, slot):
        if not self.targeted(sim, slot):
            att = _protocol_attestation(sim, v, slot)
        else:
            opts = self.options(sim, slot)
            if len(opts) < 2:
                att = _protocol_attestation(sim, v, slot)
            else:
                members = [m for m in sim.committee(slot) if not sim.is_honest(m)]
                choice = opts[members.index(v) % 2]
                nw = sim.network_view
                target = nw.ebb(choice, slot // sim.C)
                source = last_justified(nw, choice)
                att = make_attestation_msg(v, slot, choice, source, target, slot + self.fake_timestamp)
        sim.log("attest", slot=slot, validator=v, att=att.id, vote=att.ghost_vote,
                source=str(att.source), target=str(att.target), byzantine=True)
        sim.broadcast(v, att)


class Chaos(Strategy):
    """Random mix of withholding, forking, partial and late broadcast and double votes."""

    name = "chaos"

    def _recipients(self, sim) -> Optional[list]:
        honest = sorted(sim.views)
        if sim.rng.random() < 0.5:
            return None
        k = int(sim.rng.integers(0, len(honest) + 1))
        return sorted(int(x) for x in sim.rng.choice(honest, size=k, replace=False))

    def _send(self, sim, v, msg):
        delay = float(sim.rng.uniform(0, 2 * sim.C)) if sim.rng.random() < 0.2 else 0.0
        sim.broadcast(v, msg, recipients=self._recipients(sim), extra_delay=delay)

    def propose(self, sim, v, slot):
        nw = sim.network_view
        roll = sim.rng.random()
        if roll < 0.2:
            return
        leaves = [b for b in nw.leaves() if nw.blocks[b].slot < slot]
        if roll < 0.5 and leaves:
            parent = leaves[int(sim.rng.integers(len(leaves)))]
        else:
            parent = hlmd(nw)
        if nw.blocks[parent].slot >= slot:
            return
        atts = sim.eligible_attestations(nw, parent, slot)
        if atts:
            keep = sim.rng.random(len(atts)) < 0.7
            atts = [a for a, k in zip(atts, keep) if k]
        copies = 2 if sim.rng.random() < 0.25 else 1
        for i in range(copies):
            blk = make_block(slot, parent, atts, v, payload=f"chaos-{i}".encode())
            sim.log("propose", slot=slot, validator=v, block=blk.id, parent=parent,
                    atts=len(atts), byzantine=True)
            self._send(sim, v, blk)

    def attest_time(self, sim, v, slot):
        return slot + float(sim.rng.uniform(0.0, 1.0))

    def attest(self, sim, v, slot):
        nw = sim.network_view
        roll = sim.rng.random()
        if roll < 0.2:
            return
        e = slot // sim.C
        count = 2 if sim.rng.random() < 0.2 else 1
        blocks = sorted(b for b, blk in nw.blocks.items() if blk.slot <= slot)
        for _ in range(count):
            vote = blocks[int(sim.rng.integers(len(blocks)))] if roll < 0.6 else hlmd(nw)
            target = nw.ebb(vote, e)
            js, _, _ = chain_justified(nw, target.block)
            srcs = sorted((p for p in js if p.aep < e), key=lambda p: p.key())
            if not srcs:
                if e > 0:
                    continue
                srcs = [target]
            source = srcs[int(sim.rng.integers(len(srcs)))] if sim.rng.random() < 0.5 else srcs[-1]
            att = make_attestation_msg(v, slot, vote, source, target, slot + 0.5)
            sim.log("attest", slot=slot, validator=v, att=att.id, vote=vote,
                    source=str(source), target=str(target), byzantine=True)
            self._send(sim, v, att)


def make_strategy(config) -> Strategy:
    name = config.strategy
    if name == "withhold":
        return Withhold()
    if name == "fork_builder":
        return ForkBuilder()
    if name == "smoke_bomb":
        return SmokeBomb(config.smoke_vote_time, config.smoke_fake_timestamp, config.smoke_slots)
    if name == "chaos":
        return Chaos()
    raise ValueError(f"unknown strategy {name!r}")
