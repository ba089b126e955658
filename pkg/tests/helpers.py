"""Builders for hand-made views with readable block names."""

from __future__ import annotations

import random
from itertools import count
from typing import Iterable, Optional

from gasperlab.chain_store import (
    GENESIS_ID,
    CheckpointPair,
    ValidatorSet,
    View,
    make_attestation_msg,
    make_block,
)


class ViewBuilder:
    def __init__(self, C: int = 4, n: int = 3, stakes: Optional[Iterable[float]] = None):
        vals = ValidatorSet(tuple(stakes)) if stakes is not None else ValidatorSet.uniform(n)
        self.view = View(C, vals)
        self.ids = {"G": GENESIS_ID}
        self.names = {GENESIS_ID: "G"}
        self.msgs = {}
        self._n = count()

    def __getitem__(self, name: str) -> str:
        return self.ids[name]

    def name(self, bid: str) -> str:
        return self.names[bid]

    def pair(self, name: str, aep: int) -> CheckpointPair:
        return CheckpointPair(self.ids[name], aep)

    def block(self, name, slot, parent="G", atts=(), proposer=None, deliver=True):
        b = make_block(slot, self.ids[parent], [self.ids[a] for a in atts], proposer, payload=name.encode())
        self.ids[name] = b.id
        self.names[b.id] = name
        self.msgs[name] = b
        if deliver:
            self.view.deliver(b)
        return b

    def att(self, name, author, slot, vote, source=("G", 0), target=None, deliver=True):
        e = slot // self.view.C
        tgt = self.view.ebb(self.ids[vote], e) if target is None else self.pair(*target)
        a = make_attestation_msg(author, slot, self.ids[vote], self.pair(*source), tgt)
        self.ids[name] = a.id
        self.msgs[name] = a
        if deliver:
            self.view.deliver(a)
        return a

    def link(self, prefix, authors, slot, vote, source=("G", 0), target=None, deliver=True):
        """One attestation per author with the same checkpoint edge; returns their names."""
        names = []
        for v in authors:
            nm = f"{prefix}.{v}"
            self.att(nm, v, slot, vote, source, target, deliver)
            names.append(nm)
        return names


def fig3_builder() -> ViewBuilder:
    """The LMD GHOST example tree with eight single-stake validators."""
    vb = ViewBuilder(C=64, n=8)
    vb.block("A", 1)
    vb.block("B", 2, "A")
    vb.block("C", 3, "B")
    vb.block("D", 3, "B")
    vb.block("E", 4, "C")
    vb.block("F", 4, "C")
    vb.block("G1", 4, "C")
    vb.block("H", 5, "E")
    vb.block("I", 4, "D")
    vb.block("J", 5, "I")
    vb.block("K", 5, "I")
    vb.block("L", 6, "K")
    vb.block("M", 7, "L")
    votes = ["G1", "G1", "G1", "H", "F", "J", "L", "M"]
    for v, blk in enumerate(votes):
        vb.att(f"v{v}", v, 8, blk)
    return vb


def fig6_builder(delayed: str = "none") -> ViewBuilder:
    """Two validators' worth of history around epochs 1-3 with 64 slots per epoch.

    ``delayed`` moves attestations out of view(180): "epoch2" moves the votes
    justifying (64, 2) into block 193, "both" also moves the votes justifying
    (64, 1) onto the short fork at 130.
    """
    vb = ViewBuilder(C=64, n=4)
    voters = [0, 1, 2]
    vb.block("1", 1)
    vb.block("63", 63, "1")
    vb.block("64", 64, "63")
    e1 = vb.link("e1", voters, 100, "64", ("G", 0), ("64", 1))
    e2 = vb.link("e2", voters, 170, "64", ("G", 0), ("64", 2))
    vb.block("129", 129, "64", atts=[] if delayed == "both" else e1)
    vb.block("130", 130, "64", atts=e1 if delayed == "both" else [])
    vb.block("131", 131, "129")
    vb.block("180", 180, "131", atts=[] if delayed in ("epoch2", "both") else e2)
    vb.block("193", 193, "180", atts=e2 if delayed in ("epoch2", "both") else [])
    return vb


def random_view(rng: random.Random, C: int = 4, n: int = 4, max_blocks: int = 30, max_atts: int = 100,
                stakes=None) -> View:
    """A random well-formed view grown slot by slot.

    Attestations vote for a random known block, target that block's boundary
    pair and pick their source among earlier boundary pairs of the same chain,
    preferring pairs already justified so that justification actually occurs.
    """
    from gasperlab.ffg import justified

    vals = ValidatorSet(tuple(stakes)) if stakes is not None else ValidatorSet.uniform(n)
    view = View(C, vals)
    blocks = [GENESIS_ID]
    atts = []
    slot = 0
    target_blocks = rng.randint(3, max_blocks)
    target_atts = rng.randint(0, max_atts)
    while len(blocks) < target_blocks or len(atts) < target_atts:
        slot += 1
        if len(blocks) < target_blocks and rng.random() < 0.8:
            for _ in range(rng.choice((1, 1, 1, 2))):
                parent = rng.choice(blocks[-6:]) if rng.random() < 0.8 else rng.choice(blocks)
                if view.blocks[parent].slot >= slot:
                    continue
                older = [a for a in atts if view.attestations[a].slot < slot]
                inc = rng.sample(older, min(len(older), rng.randint(0, 6)))
                b = make_block(slot, parent, inc, rng.randrange(n), payload=bytes([rng.randrange(256)]))
                view.deliver(b)
                blocks.append(b.id)
        if len(atts) < target_atts:
            js = justified(view)
            e = slot // C
            for _ in range(rng.randint(0, 6)):
                vote = rng.choice(blocks[-8:])
                tgt = view.ebb(vote, e)
                chain = set(view.chain(tgt.block))
                cands = [p for p in js if p.block in chain and p.aep < e]
                if not cands or rng.random() < 0.2:
                    k = rng.randint(0, max(0, e - 1)) if e > 0 else None
                    if k is None:
                        continue
                    src = view.ebb(tgt.block, k)
                else:
                    src = max(cands, key=lambda p: p.key()) if rng.random() < 0.7 else rng.choice(sorted(cands))
                if src.aep >= e:
                    continue
                a = make_attestation_msg(rng.randrange(n), slot, vote, src, tgt)
                if a.id not in view and view.deliver(a):
                    atts.append(a.id)
        if slot > 400:
            break
    return view
