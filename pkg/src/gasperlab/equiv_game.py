"""One-shot two-option voting game for a single slot under network latency.

Honest validators intend to vote at time 1/2 for whichever option holds
more stake in their current view, defaulting to O1 on ties. Dishonest
validators vote early and split their stake across O1 and O2 to confuse
the honest ones. The game is won when some option collects at least two
thirds of the total stake.

A validator that intends to act at time t acts at t + X with
X ~ U[-eps1, eps1]; its message reaches each recipient after a further
a + Y with Y ~ U[-eps2, eps2] drawn per recipient. Realized times are
clamped into [0, 1], and a message never arrives before it was sent.

All randomness for a trial is drawn up front into a :class:`Noise` record,
so the vectorized player and the scalar reference player can be run on
exactly the same draws.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

BLOCK_TRIALS = 512


@dataclass
class EquivGameConfig:
    n_honest: int = 74
    n_byzantine: int = 37
    stakes: Optional[tuple] = None
    a: float = 0.0
    eps1: float = 0.0
    eps2: float = 0.0
    dishonest_vote_time: Optional[float] = 0.5  # None means the dishonest validators abstain
    claimed_timestamp: float = 0.5
    honor_claimed_timestamps: bool = False
    random_split: bool = False
    trials: int = 20000
    seed: int = 0

    def __post_init__(self):
        if self.stakes is not None:
            self.stakes = tuple(float(s) for s in self.stakes)
        self.validate()

    @property
    def n(self) -> int:
        return self.n_honest + self.n_byzantine

    def validate(self) -> None:
        if self.n_honest < 1 or self.n_byzantine < 0:
            raise ValueError("need at least one honest validator and a nonnegative byzantine count")
        for name in ("a", "eps1", "eps2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        t = self.dishonest_vote_time
        if t is not None and not 0 <= t <= 1:
            raise ValueError("dishonest_vote_time must lie in [0, 1]")
        if not 0 <= self.claimed_timestamp <= 1:
            raise ValueError("claimed_timestamp must lie in [0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.stakes is not None:
            if len(self.stakes) != self.n:
                raise ValueError("stakes must list one entry per validator, honest ones first")
            if any(s <= 0 for s in self.stakes):
                raise ValueError("stakes must be positive")

    def stake_vector(self) -> np.ndarray:
        if self.stakes is None:
            return np.ones(self.n)
        return np.asarray(self.stakes, dtype=float)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stakes"] = list(self.stakes) if self.stakes is not None else None
        return d


@dataclass
class Noise:
    """Random draws for a batch of trials.

    ``y[t, r, s]`` is the delay jitter from sender ``s`` (byzantine senders
    first, then honest ones) to honest recipient ``r``.
    """

    byz_x: np.ndarray  # (trials, n_byzantine)
    coins: np.ndarray  # (trials, n_byzantine), used only with random_split
    honest_x: np.ndarray  # (trials, n_honest)
    y: np.ndarray  # (trials, n_honest, n)

    def __len__(self) -> int:
        return self.honest_x.shape[0]


def draw_noise(cfg: EquivGameConfig, rng: np.random.Generator, trials: int) -> Noise:
    nb, nh, n = cfg.n_byzantine, cfg.n_honest, cfg.n
    return Noise(
        byz_x=rng.uniform(-cfg.eps1, cfg.eps1, (trials, nb)),
        coins=rng.integers(0, 2, (trials, nb)),
        honest_x=rng.uniform(-cfg.eps1, cfg.eps1, (trials, nh)),
        y=rng.uniform(-cfg.eps2, cfg.eps2, (trials, nh, n)),
    )


def byzantine_options(cfg: EquivGameConfig, coins: np.ndarray) -> np.ndarray:
    """Option index (0 for O1, 1 for O2) of each dishonest vote."""
    if cfg.random_split:
        return coins.astype(np.int8)
    side = np.ones(cfg.n_byzantine, dtype=np.int8)
    side[: cfg.n_byzantine // 2] = 0
    return np.broadcast_to(side, coins.shape)


def play_batch(cfg: EquivGameConfig, noise: Noise) -> np.ndarray:
    """Outcome of every trial in ``noise`` as a boolean array."""
    trials = len(noise)
    nb, nh = cfg.n_byzantine, cfg.n_honest
    stake = cfg.stake_vector()
    byz_stake, honest_stake = stake[:nb], stake[nb:]
    rows = np.arange(trials)

    abstain = cfg.dishonest_vote_time is None or nb == 0
    if abstain:
        byz_t = np.zeros((trials, nb))
        byz_opt = np.zeros((trials, nb), dtype=np.int8)
    else:
        byz_t = np.clip(cfg.dishonest_vote_time + noise.byz_x, 0.0, 1.0)
        byz_opt = byzantine_options(cfg, noise.coins)
    honest_t = np.clip(0.5 + noise.honest_x, 0.0, 1.0)
    send_t = np.concatenate([byz_t, honest_t], axis=1)
    order = np.argsort(honest_t, axis=1, kind="stable")

    votes = np.full((trials, nh), -1, dtype=np.int8)
    for k in range(nh):
        r = order[:, k]
        now = honest_t[rows, r]
        arrive = np.clip(send_t + cfg.a + noise.y[rows, r, :], 0.0, 1.0)
        arrive = np.maximum(arrive, send_t)
        seen = arrive <= now[:, None]
        if cfg.honor_claimed_timestamps:
            seen &= (now >= cfg.claimed_timestamp)[:, None]
        seen_b = seen[:, :nb] & (not abstain)
        seen_h = seen[:, nb:] & (votes >= 0)
        w1 = (seen_b & (byz_opt == 0)) @ byz_stake + (seen_h & (votes == 0)) @ honest_stake
        w2 = (seen_b & (byz_opt == 1)) @ byz_stake + (seen_h & (votes == 1)) @ honest_stake
        votes[rows, r] = np.where(w2 > w1, 1, 0)

    o1 = (votes == 0) @ honest_stake
    o2 = (votes == 1) @ honest_stake
    if not abstain:
        o1 = o1 + (byz_opt == 0) @ byz_stake
        o2 = o2 + (byz_opt == 1) @ byz_stake
    need = 2 * stake.sum() / 3
    return (o1 >= need - 1e-9) | (o2 >= need - 1e-9)


def play_trial(cfg: EquivGameConfig, noise: Noise, i: int) -> bool:
    """Reference player for trial ``i``: plain loops, one voter at a time."""
    nb, nh = cfg.n_byzantine, cfg.n_honest
    stake = [float(s) for s in cfg.stake_vector()]
    abstain = cfg.dishonest_vote_time is None or nb == 0
    if cfg.random_split:
        sides = [int(c) for c in noise.coins[i]]
    else:
        sides = [0 if j < nb // 2 else 1 for j in range(nb)]

    def clamp(t):
        return min(max(t, 0.0), 1.0)

    senders = []  # (send time, option or None until voted, stake)
    if not abstain:
        for j in range(nb):
            senders.append([clamp(cfg.dishonest_vote_time + noise.byz_x[i, j]), sides[j], stake[j]])
    else:
        for j in range(nb):
            senders.append([0.0, None, stake[j]])
    for h in range(nh):
        senders.append([clamp(0.5 + noise.honest_x[i, h]), None, stake[nb + h]])

    for h in sorted(range(nh), key=lambda h: (senders[nb + h][0], h)):
        now = senders[nb + h][0]
        tally = [0.0, 0.0]
        if not (cfg.honor_claimed_timestamps and now < cfg.claimed_timestamp):
            for s, (t, opt, w) in enumerate(senders):
                if opt is None:
                    continue
                arrive = max(clamp(t + cfg.a + noise.y[i, h, s]), t)
                if arrive <= now:
                    tally[opt] += w
        senders[nb + h][1] = 1 if tally[1] > tally[0] else 0

    totals = [0.0, 0.0]
    for _, opt, w in senders:
        if opt is not None:
            totals[opt] += w
    need = 2 * sum(stake) / 3
    return max(totals) >= need - 1e-9


def play_once(cfg: EquivGameConfig, rng: np.random.Generator) -> bool:
    """Play a single game with fresh draws from ``rng``."""
    return play_trial(cfg, draw_noise(cfg, rng, 1), 0)


@dataclass
class WinRate:
    wins: int
    trials: int

    @property
    def rate(self) -> float:
        return self.wins / self.trials


def _block_wins(args) -> int:
    cfg, block, count = args
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, block]))
    # always draw a full block so a trial's outcome does not depend on the total count
    noise = draw_noise(cfg, rng, BLOCK_TRIALS)
    return int(play_batch(cfg, noise)[:count].sum())


def estimate_win_rate(cfg: EquivGameConfig, parallel: int = 1) -> WinRate:
    """Monte Carlo win rate over ``cfg.trials`` games, independent of ``parallel``."""
    jobs = []
    left = cfg.trials
    block = 0
    while left > 0:
        jobs.append((cfg, block, min(left, BLOCK_TRIALS)))
        left -= BLOCK_TRIALS
        block += 1
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            wins = list(pool.map(_block_wins, jobs))
    else:
        wins = [_block_wins(j) for j in jobs]
    return WinRate(sum(wins), cfg.trials)


PESSIMISTIC = dict(a=0.15, eps1=0.05, eps2=0.15)
INBETWEEN = dict(a=0.1, eps1=0.05, eps2=0.1)
OPTIMISTIC = dict(a=0.0, eps1=0.05, eps2=0.0)
REGIMES = {"pessimistic": PESSIMISTIC, "inbetween": INBETWEEN, "optimistic": OPTIMISTIC}
