import random

import pytest

from gasperlab.chain_store import GENESIS_ID, CheckpointPair, View
from gasperlab.ffg import (
    GENESIS_PAIR,
    finalization_witnesses,
    finalized,
    finalized_depths,
    finalized_four_case,
    is_supermajority,
    justified,
    justified_from,
    last_justified,
    make_attestation,
    SupermajorityLink,
    supermajority_links,
)

from helpers import ViewBuilder, fig6_builder, random_view
from oracles import naive_justified


def epoch_chain(links, C=4, n=3, epochs=5):
    """A single chain with a block at every epoch boundary and the given links.

    ``links`` lists (source epoch, target epoch) edges. Every validator
    votes for each edge in the target epoch, and the votes are included in
    the next block.
    """
    vb = ViewBuilder(C=C, n=n)
    prev = "G"
    for e in range(1, epochs + 1):
        vb.block(f"B{e}", e * C, prev)
        prev = f"B{e}"
        pending = []
        for s, t in links:
            if t == e:
                src = ("G", 0) if s == 0 else (f"B{s}", s)
                pending += vb.link(f"l{s}-{t}", range(n), e * C + 1, f"B{e}", src, (f"B{t}", t))
        if pending:
            vb.block(f"I{e}", e * C + 2, prev, atts=pending)
            prev = f"I{e}"
    return vb


def test_strict_two_thirds_threshold():
    assert is_supermajority(67, 100)
    assert not is_supermajority(66, 100)
    assert not is_supermajority(2, 3) and is_supermajority(3, 4) is True


@pytest.mark.parametrize("voters,linked", [(67, True), (66, False)])
def test_link_needs_more_than_two_thirds(voters, linked):
    vb = ViewBuilder(C=4, n=100)
    vb.block("B", 4)
    vb.link("v", range(voters), 5, "B", ("G", 0), ("B", 1))
    assert (vb.pair("B", 1) in justified(vb.view)) is linked


def test_repeated_votes_count_once():
    vb = ViewBuilder(C=4, n=3)
    vb.block("B", 4)
    vb.link("a", [0, 1], 5, "B", ("G", 0), ("B", 1))
    vb.link("b", [0, 1], 6, "B", ("G", 0), ("B", 1))  # same authors, new slot
    assert supermajority_links(vb.view) == []


def test_empty_view_justifies_only_genesis():
    assert justified(View(4, 3)) == {GENESIS_PAIR}
    assert finalized(View(4, 3)) == {GENESIS_PAIR}


def test_link_chain_is_transitive():
    vb = epoch_chain([(0, 1), (1, 2)])
    assert justified(vb.view) == {GENESIS_PAIR, vb.pair("B1", 1), vb.pair("B2", 2)}


def test_link_from_unjustified_source_does_not_justify():
    vb = epoch_chain([(1, 2)])
    assert justified(vb.view) == {GENESIS_PAIR}


def test_closure_matches_fixpoint_on_random_link_graphs():
    rng = random.Random(5)
    pairs = [CheckpointPair(f"{i:016x}", e) for e in range(1, 6) for i in range(3)]
    for _ in range(300):
        links = []
        for _ in range(rng.randint(0, 12)):
            a = rng.choice([GENESIS_PAIR] + pairs)
            b = rng.choice(pairs)
            if a.aep < b.aep:
                links.append(SupermajorityLink(a, b, 1.0))
        js = justified_from(links)
        fix = {GENESIS_PAIR}
        while True:
            new = {l.target for l in links if l.source in fix} - fix
            if not new:
                break
            fix |= new
        assert js == fix


def test_justified_matches_naive_oracle_on_random_views():
    for seed in range(80):
        v = random_view(random.Random(seed))
        assert justified(v) == naive_justified(v)


@pytest.mark.parametrize(
    "links,blue,k",
    [
        ([(0, 1), (1, 2)], "B1", 1),
        ([(0, 1), (0, 2), (1, 3)], "B1", 2),
        ([(0, 1), (0, 2), (0, 3), (1, 4)], "B1", 3),
    ],
)
def test_k_finalization(links, blue, k):
    vb = epoch_chain(links)
    depths = finalized_depths(vb.view)
    assert depths[vb.pair(blue, 1)] == k
    assert finalization_witnesses(vb.view)[vb.pair(blue, 1)] == {k}


def test_justified_pair_without_outgoing_link_is_not_final():
    vb = epoch_chain([(0, 1), (1, 2)])
    assert vb.pair("B2", 2) in justified(vb.view)
    assert vb.pair("B2", 2) not in finalized(vb.view)


def test_gap_in_justification_blocks_finalization():
    # B2 is never justified, so the two-epoch link from B1 finalizes nothing
    vb = epoch_chain([(0, 1), (1, 3)])
    assert vb.pair("B1", 1) not in finalized(vb.view)


def test_target_must_be_boundary_of_its_own_chain():
    # link into a pair whose block lies after the epoch boundary is no finalization witness
    vb = ViewBuilder(C=4, n=3)
    vb.block("B1", 4)
    l1 = vb.link("a", range(3), 5, "B1", ("G", 0), ("B1", 1))
    vb.block("X", 6, "B1", atts=l1)
    vb.link("b", range(3), 9, "X", ("B1", 1), ("X", 2))
    assert vb.pair("B1", 1) in finalized(vb.view)  # X is the EBB of epoch 2 on its chain


# The four practical cases, each on a chain of boundary blocks B1..B4.
FOUR_CASES = [
    ("case1", [(0, 1), (0, 2), (1, 3)], "B1", 1),
    ("case2", [(0, 2), (2, 3)], "B2", 2),
    ("case3", [(0, 2), (0, 3), (2, 4)], "B2", 2),
    ("case4", [(0, 3), (3, 4)], "B3", 3),
]


@pytest.mark.parametrize("name,links,blue,epoch", FOUR_CASES)
def test_four_case_rules(name, links, blue, epoch):
    vb = epoch_chain(links)
    pair = vb.pair(blue, epoch)
    assert pair in finalized_four_case(vb.view)
    assert pair in finalized(vb.view)


def test_four_case_misses_three_epoch_finalization():
    vb = epoch_chain([(0, 1), (0, 2), (0, 3), (1, 4)])
    assert vb.pair("B1", 1) in finalized(vb.view)
    assert vb.pair("B1", 1) not in finalized_four_case(vb.view)


def test_straight_chain_finalizes_every_epoch():
    vb = epoch_chain([(0, 1), (1, 2), (2, 3), (3, 4)])
    fc = finalized_four_case(vb.view)
    assert {vb.pair(f"B{e}", e) for e in (1, 2, 3)} <= fc
    assert fc == finalized(vb.view)


def test_four_case_is_subset_of_shallow_finalization():
    for seed in range(120):
        v = random_view(random.Random(seed), C=2)
        depths = finalized_depths(v)
        shallow = {p for p, k in depths.items() if k <= 2}
        assert finalized_four_case(v) <= shallow


def test_finalized_within_justified_and_monotone():
    for seed in range(60):
        v = random_view(random.Random(seed))
        js, fs = justified(v), finalized(v)
        assert fs <= js
        # any prefix of the acceptance order is a smaller view
        small = View(v.C, v.validators)
        for mid in v.order[1 : len(v.order) // 2]:
            small.deliver(v.message(mid))
        assert justified(small) <= js
        assert finalized(small) <= fs


def test_fig6_attestation_edge():
    vb = fig6_builder()
    att = make_attestation(vb.view, 3, 193)
    assert att.ghost_vote == vb["193"]
    assert att.source == vb.pair("64", 2)
    assert att.target == vb.pair("180", 3)
    # both links start at genesis, so nothing beyond genesis is final yet
    assert finalized(vb.view) == {GENESIS_PAIR}


@pytest.mark.parametrize("delayed,source", [("epoch2", ("64", 1)), ("both", ("G", 0))])
def test_fig6_delayed_justification_changes_source(delayed, source):
    vb = fig6_builder(delayed)
    # the whole view still knows both justifications
    assert {vb.pair("64", 1), vb.pair("64", 2)} <= justified(vb.view)
    att = make_attestation(vb.view, 3, 193)
    assert att.source == vb.pair(*source)
    assert att.target.aep == 3


def test_genesis_only_attestation():
    v = View(4, 3)
    att = make_attestation(v, 1, 9)
    assert att.ghost_vote == GENESIS_ID
    assert att.source == GENESIS_PAIR
    assert att.target == CheckpointPair(GENESIS_ID, 2)


def test_attestation_requires_committee_membership():
    with pytest.raises(ValueError):
        make_attestation(View(4, 3), 1, 3, committee=[0, 2])


def test_last_justified_reads_ffg_view():
    vb = fig6_builder()
    # the boundary block of 180 is 64, whose view holds no links
    assert last_justified(vb.view, vb["180"]) == GENESIS_PAIR
    assert last_justified(vb.view, vb["193"]) == vb.pair("64", 2)
