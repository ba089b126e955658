"""LMD GHOST, the prototype hybrid rule and the final hybrid rule (HLMD GHOST)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .chain_store import GENESIS_ID, Attestation, CheckpointPair, View
from .ffg import GENESIS_PAIR, ffg_justified, highest_pair, justified


def latest_messages(
    view: View,
    *,
    max_att_slot: Optional[int] = None,
    min_att_epoch: Optional[int] = None,
) -> dict[int, Attestation]:
    """Each author's attestation with the highest (slot, id).

    ``max_att_slot`` hides attestations newer than a slot, which is how the
    consideration delay is applied. ``min_att_epoch`` drops stale ones.
    """
    out = {}
    for author, atts in view.by_author.items():
        best = None
        for a in atts:
            if max_att_slot is not None and a.slot > max_att_slot:
                continue
            if min_att_epoch is not None and view.epoch(a.slot) < min_att_epoch:
                continue
            if best is None or (a.slot, a.id) > (best.slot, best.id):
                best = a
        if best is not None:
            out[author] = best
    return out


def subtree_weights(view: View, m: dict[int, Attestation]) -> dict[str, float]:
    """Weight of every block: stake whose latest vote is the block or below it."""
    w = dict.fromkeys(view.blocks, 0.0)
    stakes = view.validators.stakes
    for author, att in m.items():
        w[att.ghost_vote] += stakes[author]
    # parents always have a lower slot than their children
    for bid in sorted(view.blocks, key=lambda b: view.blocks[b].slot, reverse=True):
        parent = view.blocks[bid].parent
        if parent is not None:
            w[parent] += w[bid]
    return w


def ghost_weight(view: View, b: str, m: dict[int, Attestation]) -> float:
    view.block(b)
    stakes = view.validators.stakes
    return sum(stakes[a] for a, att in m.items() if view.is_ancestor(b, att.ghost_vote))


@dataclass
class ForkChoiceResult:
    head: str
    start: CheckpointPair
    path: list[str] = field(default_factory=list)
    weights: dict[str, float] = field(default_factory=dict)
    tie: bool = False


def _descend(view: View, start: str, weights: dict[str, float], allowed=None) -> list[str]:
    path = [start]
    cur = start
    while True:
        kids = [c for c in view.children[cur] if allowed is None or c in allowed]
        if not kids:
            return path
        cur = max(kids, key=lambda c: (weights[c], c))
        path.append(cur)


def lmd_ghost_result(view: View, **filters) -> ForkChoiceResult:
    weights = subtree_weights(view, latest_messages(view, **filters))
    path = _descend(view, GENESIS_ID, weights)
    return ForkChoiceResult(path[-1], GENESIS_PAIR, path, weights)


def lmd_ghost(view: View, **filters) -> str:
    return lmd_ghost_result(view, **filters).head


def hlmd_prototype_result(view: View, **filters) -> ForkChoiceResult:
    start, tie = highest_pair(justified(view))
    weights = subtree_weights(view, latest_messages(view, **filters))
    path = _descend(view, start.block, weights)
    return ForkChoiceResult(path[-1], start, path, weights, tie)


def hlmd_prototype(view: View, **filters) -> str:
    return hlmd_prototype_result(view, **filters).head


def hlmd_result(view: View, **filters) -> ForkChoiceResult:
    leaves = view.leaves()
    per_leaf = {leaf: ffg_justified(view, leaf) for leaf in leaves}
    best, tie = highest_pair(best for _, best, _ in per_leaf.values())
    tie = tie or any(t and b == best for _, b, t in per_leaf.values())
    kept = [leaf for leaf in leaves if best in per_leaf[leaf][0]]
    allowed = set()
    for leaf in kept:
        cur: Optional[str] = leaf
        while cur is not None and cur not in allowed:
            allowed.add(cur)
            cur = view.blocks[cur].parent
    weights = subtree_weights(view, latest_messages(view, **filters))
    path = _descend(view, best.block, weights, allowed)
    return ForkChoiceResult(path[-1], best, path, weights, tie)


def hlmd(view: View, **filters) -> str:
    return hlmd_result(view, **filters).head
