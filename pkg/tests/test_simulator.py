import pytest

from gasperlab.chain_store import GENESIS_ID
from gasperlab.ffg import finalized, highest_pair, justified
from gasperlab.fork_choice import hlmd
from gasperlab.simulator import NetworkParams, SimConfig, Simulation, run
from gasperlab.simulator.fuzz import (
    check_safety_case,
    fuzz_conflicting_finality,
    fuzz_plausible_liveness,
    innocence_sweep,
    run_liveness_case,
)
from gasperlab.slashing import Violation, detect

PESSIMISTIC = NetworkParams(a=0.15, eps1=0.05, eps2=0.15)
OPTIMISTIC = NetworkParams(a=0.0, eps1=0.05, eps2=0.0)


def test_honest_zero_latency_run():
    tr = run(SimConfig(validator_count=16, slots_per_epoch=4, epochs=4))
    nw = tr.network_view
    # one block per slot after genesis
    assert sorted(b.slot for b in nw.blocks.values()) == list(range(16))
    for m in tr.metrics:
        assert m["max_justified_aep"] == m["epoch"]
        if m["epoch"] >= 2:
            assert m["max_finalized_aep"] == m["epoch"] - 1
            assert m["finalized_k1"] == m["epoch"] - 1
        assert m["views_agree"] and m["evidence"] == 0


def test_runs_are_reproducible():
    cfg = dict(validator_count=24, slots_per_epoch=4, epochs=3, byz_count=7, strategy="chaos",
               network=NetworkParams(0.3, 0.1, 0.3), seed=11)
    a, b = run(SimConfig(**cfg)), run(SimConfig(**cfg))
    assert a.events == b.events
    assert a.metrics == b.metrics
    assert a.network_view.order == b.network_view.order
    c = run(SimConfig(**{**cfg, "seed": 12}))
    assert c.events != a.events


def test_withholding_minority_cannot_stop_finality():
    tr = run(SimConfig(validator_count=24, slots_per_epoch=4, epochs=5, byz_count=7, strategy="withhold", seed=3))
    assert tr.metrics[-1]["max_finalized_aep"] >= 2
    assert not any(a.author in tr.byzantine for a in tr.network_view.attestations.values())


def test_fork_builder_is_caught_proposing_twice():
    tr = run(SimConfig(validator_count=24, slots_per_epoch=4, epochs=4, byz_count=7, strategy="fork_builder", seed=3))
    evidence, _ = detect(tr.network_view)
    kinds = {e.kind for e in evidence}
    assert kinds == {Violation.DOUBLE_PROPOSAL}
    assert {e.author for e in evidence} <= set(tr.byzantine)
    assert tr.honest_evidence() == []


def test_views_agree_under_half_slot_synchrony():
    for seed in range(4):
        tr = run(SimConfig(validator_count=16, slots_per_epoch=4, epochs=4,
                           network=NetworkParams(0.2, 0.1, 0.15), seed=seed))
        assert all(m["views_agree"] for m in tr.metrics)


def test_finalized_blocks_sit_on_every_honest_head_chain():
    for seed in range(4):
        tr = run(SimConfig(validator_count=24, slots_per_epoch=4, epochs=5, byz_count=5,
                           strategy="withhold", network=NetworkParams(0.2, 0.1, 0.15), seed=seed))
        for view in tr.views.values():
            head = hlmd(view)
            for p in finalized(view):
                assert view.is_ancestor(p.block, head)


def test_new_justification_descends_from_previous_one():
    sim = Simulation(SimConfig(validator_count=24, slots_per_epoch=4, byz_count=7, strategy="withhold",
                               network=PESSIMISTIC, seed=5))
    nw = sim.network_view
    prev = highest_pair(justified(nw))[0]
    for _ in range(6):
        sim.run_epochs(1)
        top = highest_pair(justified(nw))[0]
        if top != prev:
            assert nw.is_ancestor(prev.block, top.block)
        prev = top


def test_justification_rate_near_one_third_byzantine():
    # 15 of 48 withholding: honest stake is just above two thirds
    hits = epochs = 0
    for seed in range(20):
        tr = run(SimConfig(validator_count=48, slots_per_epoch=4, epochs=6, byz_count=15,
                           strategy="withhold", network=PESSIMISTIC, seed=seed))
        for m in tr.metrics[1:]:
            epochs += 1
            hits += m["max_justified_aep"] == m["epoch"]
    assert hits / epochs >= 0.8


def smoke_slot_share(net, seed, vote_time=0.4, consideration_delay=False):
    """Largest vote share in slot 1 when a byzantine proposer forks it, else None."""
    cfg = SimConfig(validator_count=111, slots_per_epoch=1, epochs=2, byz_count=37, strategy="smoke_bomb",
                    smoke_vote_time=vote_time, honor_timestamps=False, consideration_delay=consideration_delay,
                    network=net, seed=seed)
    sim = Simulation(cfg)
    if sim.is_honest(sim.proposer(1)):
        return None
    sim.run_epochs(2)
    return sim.trace().slot_vote_shares()[1]


def smoke_shares(net, **kw):
    shares = [smoke_slot_share(net, s, **kw) for s in range(40)]
    return [s for s in shares if s is not None]


def test_smoke_bomb_splits_votes_under_pessimistic_latency():
    shares = smoke_shares(PESSIMISTIC)
    assert len(shares) >= 5
    split = sum(s < 2 / 3 - 1e-9 for s in shares)
    assert split / len(shares) >= 0.25


def test_smoke_bomb_fails_without_latency_spread():
    shares = smoke_shares(OPTIMISTIC)
    assert shares and min(shares) >= 2 / 3 - 1e-9


def test_consideration_delay_neutralizes_first_slot_split():
    shares = smoke_shares(PESSIMISTIC, consideration_delay=True)
    assert shares and min(shares) >= 2 / 3 - 1e-9


def test_consideration_delay_hides_same_slot_votes():
    sim = Simulation(SimConfig(validator_count=8, slots_per_epoch=4, consideration_delay=True))
    assert sim.attestation_filters(9) == {"max_att_slot": 8}
    sim = Simulation(SimConfig(validator_count=8, slots_per_epoch=4, stale_epochs=1))
    assert sim.attestation_filters(9) == {"min_att_epoch": 1}


def test_partial_sends_are_relayed():
    tr = run(SimConfig(validator_count=24, slots_per_epoch=4, epochs=3, byz_count=7, strategy="fork_builder", seed=8))
    assert any(e["kind"] == "relay" for e in tr.events)
    assert all(m["views_agree"] for m in tr.metrics)


def test_events_are_time_ordered():
    tr = run(SimConfig(validator_count=16, slots_per_epoch=4, epochs=3, byz_count=4, strategy="chaos",
                       network=NetworkParams(0.5, 0.2, 0.4), seed=2))
    times = [e["t"] for e in tr.events]
    assert times == sorted(times)


def test_genesis_never_proposed():
    tr = run(SimConfig(validator_count=8, slots_per_epoch=4, epochs=1))
    assert GENESIS_ID in tr.network_view.blocks
    assert all(e["slot"] > 0 for e in tr.events if e["kind"] == "propose")


def test_honest_validators_never_slashable():
    runs = innocence_sweep(4, 12)
    assert sum(r.honest_attestations for r in runs) > 0
    assert sum(r.honest_evidence for r in runs) == 0


def test_small_liveness_fuzz():
    report = fuzz_plausible_liveness(9, 12)
    assert report.failures == []
    assert report.honest_evidence == 0


def test_liveness_case_is_deterministic():
    assert run_liveness_case(3, 4) == run_liveness_case(3, 4)


def test_small_safety_fuzz():
    report = fuzz_conflicting_finality(2, 40)
    assert report.failures == []
    assert check_safety_case(2, 5) == check_safety_case(2, 5)


def test_parallel_fuzz_matches_serial():
    serial = fuzz_conflicting_finality(6, 8)
    par = fuzz_conflicting_finality(6, 8, parallel=2)
    assert serial.cases == par.cases


@pytest.mark.parametrize(
    "kw",
    [
        dict(validator_count=10, slots_per_epoch=4),
        dict(byz_count=17),
        dict(inclusion_delay=0),
        dict(strategy="nope"),
        dict(smoke_vote_time=1.5),
        dict(stakes=(1.0, 1.0)),
        dict(epochs=-1),
    ],
)
def test_invalid_config_rejected(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_negative_latency_rejected():
    with pytest.raises(ValueError):
        NetworkParams(a=-0.1)
