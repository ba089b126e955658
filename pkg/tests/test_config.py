import pytest

from gasperlab.config import ConfigError, Scenario, load_scenario, parse_scenario

GOOD = """
[scenario]
seed = 42

[simulation]
validator_count = 32
slots_per_epoch = 4
byz_count = 8
strategy = smoke_bomb
consideration_delay = yes
stakes = none

[network]
a = 0.1   # mean delay
eps2 = 0.05

[equiv_game]
trials = 500
dishonest_vote_time = none

[liveness]
C = 32
"""


def test_full_scenario_parses():
    scen = parse_scenario(GOOD)
    assert scen.seed == 42
    cfg = scen.sim_config()
    assert cfg.validator_count == 32 and cfg.byz_count == 8
    assert cfg.consideration_delay is True and cfg.stakes is None
    assert cfg.network.a == 0.1 and cfg.network.eps1 == 0.0
    eq = scen.equiv_config()
    assert eq.trials == 500 and eq.dishonest_vote_time is None
    assert scen.liveness_params().C == 32


def test_overrides_win_over_file():
    scen = parse_scenario(GOOD)
    assert scen.sim_config(byz_count=3).byz_count == 3


def test_empty_scenario_gives_defaults():
    scen = Scenario()
    assert scen.sim_config().validator_count == 16
    assert parse_scenario("").equiv_config().n == 111


def test_stake_lists():
    scen = parse_scenario("[simulation]\nvalidator_count = 4\nslots_per_epoch = 2\nstakes = 0.5, 1.5 1 1\n")
    assert scen.sim_config().stakes == (0.5, 1.5, 1.0, 1.0)


@pytest.mark.parametrize(
    "text,needle",
    [
        ("[bogus]\nx = 1\n", "bogus"),
        ("[simulation]\nvalidators = 4\n", "simulation.validators"),
        ("[scenario]\nname = x\n", "scenario.name"),
        ("[simulation]\nepochs = many\n", "simulation.epochs"),
        ("[simulation]\nconsideration_delay = maybe\n", "consideration_delay"),
        ("[network]\na = -1\n", "network"),
        ("[simulation]\nvalidator_count = 10\nslots_per_epoch = 4\n", "simulation"),
        ("[equiv_game]\ndishonest_vote_time = 2\n", "equiv_game"),
        ("no section header\n", "malformed"),
    ],
)
def test_bad_scenarios(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_scenario(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "absent.ini")


def test_load_from_disk(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text(GOOD)
    assert load_scenario(p).seed == 42
