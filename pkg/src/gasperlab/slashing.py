"""Slashing conditions, evidence collection and accountability bounds."""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Union

from .chain_store import Attestation, Block, ValidatorSet, View


class Violation(str, enum.Enum):
    S1 = "S1"
    S2 = "S2"
    DOUBLE_PROPOSAL = "DoubleProposal"


@dataclass(frozen=True)
class SlashingEvidence:
    author: int
    kind: Violation
    first: Union[Attestation, Block]
    second: Union[Attestation, Block]


def _surrounds(outer: Attestation, inner: Attestation) -> bool:
    return outer.source.aep < inner.source.aep < inner.target.aep < outer.target.aep


def check_pair(a1: Attestation, a2: Attestation) -> Optional[Violation]:
    """Which slashing condition, if any, two attestations by one author violate.

    The attestation epoch of each message is its target epoch, which always
    equals the epoch of its slot for well-formed attestations.
    """
    if a1.author != a2.author:
        raise ValueError("attestations have different authors")
    if a1.id == a2.id:
        return None
    e1, e2 = a1.target.aep, a2.target.aep
    if e1 == e2:
        return Violation.S1
    if _surrounds(a1, a2) or _surrounds(a2, a1):
        return Violation.S2
    return None


def detect_in(atts, blocks, validators: ValidatorSet) -> tuple[list[SlashingEvidence], float]:
    evidence: list[SlashingEvidence] = []
    by_author: dict[int, list[Attestation]] = defaultdict(list)
    for a in atts:
        by_author[a.author].append(a)
    for author in sorted(by_author):
        mine = sorted(by_author[author], key=lambda a: (a.slot, a.id))
        for x, y in combinations(mine, 2):
            kind = check_pair(x, y)
            if kind is not None:
                evidence.append(SlashingEvidence(author, kind, x, y))
    proposals: dict[tuple[int, int], list[Block]] = defaultdict(list)
    for b in blocks:
        if b.proposer is not None:
            proposals[(b.proposer, b.slot)].append(b)
    for (author, _), group in sorted(proposals.items()):
        group.sort(key=lambda b: b.id)
        for x, y in combinations(group, 2):
            evidence.append(SlashingEvidence(author, Violation.DOUBLE_PROPOSAL, x, y))
    stake = validators.weight(e.author for e in evidence)
    return evidence, stake


def detect(view: View) -> tuple[list[SlashingEvidence], float]:
    """All violating pairs in the view and the stake of distinct offenders."""
    return detect_in(view.attestations.values(), view.blocks.values(), view.validators)


def attestation_slashable_stake(evidence: list[SlashingEvidence], validators: ValidatorSet) -> float:
    """Stake of authors caught by S1 or S2 (double proposals excluded)."""
    return validators.weight(e.author for e in evidence if e.kind != Violation.DOUBLE_PROPOSAL)


@dataclass
class ValidatorSetDiff:
    """Two validator sets that evolved from a common base.

    Weights are absolute stakes. ``a_x`` is the stake that activated between
    the base and side x, ``e_x`` the stake that exited.
    """

    w_left: float
    w_right: float
    a_left: float = 0.0
    e_left: float = 0.0
    a_right: float = 0.0
    e_right: float = 0.0

    def __post_init__(self):
        for name in ("w_left", "w_right", "a_left", "e_left", "a_right", "e_right"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @classmethod
    def from_stakes(cls, base: dict, left: dict, right: dict) -> "ValidatorSetDiff":
        """Build from {validator: stake} maps of the base, left and right sets."""

        def act(new):
            return sum(s for v, s in new.items() if v not in base)

        def ext(new):
            return sum(s for v, s in base.items() if v not in new)

        return cls(
            w_left=sum(left.values()),
            w_right=sum(right.values()),
            a_left=act(left),
            e_left=ext(left),
            a_right=act(right),
            e_right=ext(right),
        )


def dynamic_safety_bound(diff: ValidatorSetDiff) -> float:
    """Stake guaranteed slashable when two sides finalize conflicting blocks."""
    overlap = max(diff.w_left - diff.a_left - diff.e_right, diff.w_right - diff.a_right - diff.e_left)
    return overlap - diff.w_left / 3 - diff.w_right / 3


def linear_safety_bound(diff: ValidatorSetDiff) -> float:
    """Sign-free form: a 2:1 convex mix of the two overlap bounds, so never above the max form."""
    return diff.w_left / 3 - (
        2 * diff.a_left / 3 + 2 * diff.e_right / 3 + diff.a_right / 3 + diff.e_left / 3
    )


def churn_bound(policy: str, k: float, dt: float, w0: float = 0.0) -> float:
    """Upper bound on activations or exits after dt epochs under a churn policy."""
    if k < 0 or dt < 0 or w0 < 0:
        raise ValueError("churn inputs must be nonnegative")
    if policy == "constant":
        return k * dt
    if policy == "proportional":
        return w0 * (1 + k) ** dt
    raise ValueError(f"unknown churn policy {policy!r}")
