"""Justification and finalization over checkpoint pairs."""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Iterable, Optional

from .chain_store import (
    GENESIS_ID,
    Attestation,
    CheckpointPair,
    ValidatorSet,
    View,
    make_attestation_msg,
)

GENESIS_PAIR = CheckpointPair(GENESIS_ID, 0)


@dataclass(frozen=True)
class SupermajorityLink:
    source: CheckpointPair
    target: CheckpointPair
    weight: float


def is_supermajority(weight: float, total: float) -> bool:
    """Strictly more than two thirds of the total stake."""
    return 3 * weight > 2 * total


def links_from(atts: Iterable[Attestation], validators: ValidatorSet) -> list[SupermajorityLink]:
    voters: dict[tuple, set] = defaultdict(set)
    for a in atts:
        if a.source.aep < a.target.aep:  # epoch-0 votes carry a degenerate self edge
            voters[(a.source, a.target)].add(a.author)
    out = []
    total = validators.total
    for (src, tgt), authors in voters.items():
        w = validators.weight(authors)
        if is_supermajority(w, total):
            out.append(SupermajorityLink(src, tgt, w))
    out.sort(key=lambda l: (l.source.key(), l.target.key()))
    return out


def justified_from(links: Iterable[SupermajorityLink]) -> frozenset:
    """Forward closure of the link graph from the genesis pair."""
    succ: dict[CheckpointPair, list[CheckpointPair]] = defaultdict(list)
    for l in links:
        succ[l.source].append(l.target)
    seen = {GENESIS_PAIR}
    todo = deque([GENESIS_PAIR])
    while todo:
        p = todo.popleft()
        for q in succ.get(p, ()):
            if q not in seen:
                seen.add(q)
                todo.append(q)
    return frozenset(seen)


def supermajority_links(view: View) -> list[SupermajorityLink]:
    return links_from(view.attestations.values(), view.validators)


def justified(view: View) -> frozenset:
    return justified_from(supermajority_links(view))


def highest_pair(pairs: Iterable[CheckpointPair]) -> tuple[Optional[CheckpointPair], bool]:
    """Highest-aep pair (id order breaks ties) and whether a tie occurred."""
    best: Optional[CheckpointPair] = None
    tie = False
    for p in pairs:
        if best is None or p.aep > best.aep:
            best, tie = p, False
        elif p.aep == best.aep and p != best:
            tie = True
            if p.block > best.block:
                best = p
    return best, tie


def chain_justified(view: View, bid: str) -> tuple[frozenset, CheckpointPair, bool]:
    """Justified pairs of view(bid) whose blocks lie on chain(bid).

    Returns the set, its highest pair and a tie flag. Links only run from a
    block to one of its descendants, so the on-chain part of the justified
    set is closed under the justification rule by itself.
    """
    cache = view.cache.chain_justified
    hit = cache.get(bid)
    if hit is not None:
        return hit
    _, att_ids = view.closure(bid)
    links = links_from((view.attestations[a] for a in att_ids), view.validators)
    on_chain = set(view.chain(bid))
    js = frozenset(p for p in justified_from(links) if p.block in on_chain)
    best, tie = highest_pair(js)
    cache[bid] = (js, best, tie)
    return cache[bid]


def ffg_justified(view: View, bid: str) -> tuple[frozenset, CheckpointPair, bool]:
    """Justified pairs seen from the FFG view of a block, restricted to its chain."""
    return chain_justified(view, view.lebb(bid).block)


def last_justified(view: View, bid: str) -> CheckpointPair:
    return ffg_justified(view, bid)[1]


def finalization_witnesses(view: View, justified_set: Optional[frozenset] = None) -> dict:
    """Map each pair to every k for which a supermajority link k-finalizes it."""
    js = justified(view) if justified_set is None else justified_set
    out: dict[CheckpointPair, set] = {}
    C = view.C
    for link in supermajority_links(view):
        src, tgt = link.source, link.target
        if src not in js or tgt.block not in view.blocks:
            continue
        k = tgt.aep - src.aep
        if k < 1 or view.blocks[tgt.block].slot > tgt.aep * C:
            continue
        if view.ebb_block(tgt.block, src.aep) != src.block:
            continue
        if all(view.ebb(tgt.block, src.aep + i) in js for i in range(1, k)):
            out.setdefault(src, set()).add(k)
    return out


def finalized_depths(view: View, justified_set: Optional[frozenset] = None) -> dict:
    """Map each finalized pair to the smallest k that finalizes it (0 for genesis)."""
    out = {p: min(ks) for p, ks in finalization_witnesses(view, justified_set).items()}
    out[GENESIS_PAIR] = 0
    return out


def finalized(view: View) -> frozenset:
    return frozenset(finalized_depths(view))


def finalized_four_case(view: View) -> frozenset:
    """Finalization using only the last four epoch boundary blocks of each chain."""
    js = justified(view)
    links = {(l.source, l.target) for l in supermajority_links(view)}
    out = {GENESIS_PAIR}
    top = max(p.aep for p in js) + 1
    for bid in view.order:
        if bid not in view.blocks:
            continue
        for e in range(1, top + 1):
            p = {i: view.ebb(bid, e - 4 + i) for i in range(1, 5) if e - 4 + i >= 0}
            j = {i: p[i] in js for i in p}
            if 1 in p and j[1] and j[2] and j[3] and (p[1], p[3]) in links:
                out.add(p[1])
            if 2 in p and j[2] and j[3] and (p[2], p[3]) in links:
                out.add(p[2])
            if 2 in p and j[2] and j[3] and j[4] and (p[2], p[4]) in links:
                out.add(p[2])
            if 3 in p and j[3] and j[4] and (p[3], p[4]) in links:
                out.add(p[3])
    return frozenset(out)


def make_attestation(
    view: View,
    author: int,
    slot: int,
    *,
    committee: Optional[Iterable[int]] = None,
    max_att_slot: Optional[int] = None,
    min_att_epoch: Optional[int] = None,
    timestamp: Optional[float] = None,
) -> Attestation:
    """The attestation an honest validator publishes at slot + 1/2."""
    from .fork_choice import hlmd

    if committee is not None and author not in set(committee):
        raise ValueError(f"validator {author} is not in the committee for slot {slot}")
    head = hlmd(view, max_att_slot=max_att_slot, min_att_epoch=min_att_epoch)
    e = view.epoch(slot)
    target = view.ebb(head, e)
    source = last_justified(view, head)
    return make_attestation_msg(author, slot, head, source, target, timestamp)
