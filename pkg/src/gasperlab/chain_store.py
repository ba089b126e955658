"""Blocks, attestations and views with dependency-gated acceptance.

A view holds the messages a validator has accepted. A message is accepted
only once everything it depends on is accepted: a block depends on its
parent and on the attestations it includes, an attestation depends on the
block it votes for. Messages that arrive early wait in a pending buffer
keyed by the first missing dependency.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional, Union

GENESIS_ID = "0" * 16


class MalformedMessage(ValueError):
    """A message that violates a structural invariant and is dropped."""


class UnknownBlock(KeyError):
    """Query about a block the view has not accepted."""


def ep(slot: int, slots_per_epoch: int) -> int:
    return slot // slots_per_epoch


@dataclass(frozen=True, order=True)
class CheckpointPair:
    block: str
    aep: int

    def key(self) -> tuple[int, str]:
        """Sort key used for "highest attestation epoch" with id tiebreak."""
        return (self.aep, self.block)

    def __str__(self) -> str:
        return f"{self.block}@{self.aep}"


@dataclass(frozen=True)
class Block:
    id: str
    slot: int
    parent: Optional[str]
    newattests: tuple[str, ...] = ()
    proposer: Optional[int] = None
    payload: bytes = b""
    timestamp: float = 0.0

    @property
    def deps(self) -> tuple[str, ...]:
        if self.parent is None:
            return ()
        return (self.parent,) + tuple(self.newattests)


@dataclass(frozen=True)
class Attestation:
    id: str
    author: int
    slot: int
    ghost_vote: str
    source: CheckpointPair
    target: CheckpointPair
    timestamp: float = 0.0

    @property
    def deps(self) -> tuple[str, ...]:
        return (self.ghost_vote,)


Message = Union[Block, Attestation]


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def block_id(slot, parent, newattests, proposer, payload, timestamp) -> str:
    atts = ",".join(newattests)
    return _digest(f"B|{slot}|{parent}|{atts}|{proposer}|{payload.hex()}|{timestamp!r}")


def attestation_id(author, slot, ghost_vote, source, target, timestamp) -> str:
    return _digest(
        f"A|{author}|{slot}|{ghost_vote}|{source.block}|{source.aep}"
        f"|{target.block}|{target.aep}|{timestamp!r}"
    )


def make_genesis() -> Block:
    return Block(id=GENESIS_ID, slot=0, parent=None, timestamp=0.0)


def make_block(
    slot: int,
    parent: str,
    newattests: Iterable[str] = (),
    proposer: Optional[int] = None,
    payload: bytes = b"",
    timestamp: Optional[float] = None,
) -> Block:
    """Build a block whose id is a digest of its full content."""
    atts = tuple(newattests)
    ts = float(slot) if timestamp is None else float(timestamp)
    bid = block_id(slot, parent, atts, proposer, payload, ts)
    return Block(bid, slot, parent, atts, proposer, payload, ts)


def make_attestation_msg(
    author: int,
    slot: int,
    ghost_vote: str,
    source: CheckpointPair,
    target: CheckpointPair,
    timestamp: Optional[float] = None,
) -> Attestation:
    ts = slot + 0.5 if timestamp is None else float(timestamp)
    aid = attestation_id(author, slot, ghost_vote, source, target, ts)
    return Attestation(aid, author, slot, ghost_vote, source, target, ts)


def expected_id(msg: Message) -> str:
    if isinstance(msg, Block):
        if msg.parent is None:
            return GENESIS_ID
        return block_id(msg.slot, msg.parent, msg.newattests, msg.proposer, msg.payload, msg.timestamp)
    return attestation_id(msg.author, msg.slot, msg.ghost_vote, msg.source, msg.target, msg.timestamp)


@dataclass
class ValidatorSet:
    """Validator stakes indexed by validator id; total stake equals the count."""

    stakes: tuple[float, ...]

    def __post_init__(self):
        self.stakes = tuple(float(s) for s in self.stakes)
        if any(s < 0 for s in self.stakes):
            raise ValueError("stakes must be nonnegative")
        n = len(self.stakes)
        if n and not math.isclose(sum(self.stakes), n, rel_tol=1e-9):
            raise ValueError(f"total stake {sum(self.stakes)} must equal validator count {n}")

    @classmethod
    def uniform(cls, n: int) -> "ValidatorSet":
        return cls((1.0,) * n)

    def __len__(self) -> int:
        return len(self.stakes)

    @property
    def total(self) -> float:
        return float(len(self.stakes))

    def weight(self, ids: Iterable[int]) -> float:
        return sum(self.stakes[i] for i in set(ids))


class DerivedCache:
    """Per-block derived data shared by views that agree on the same messages.

    Block and attestation ids are content digests, so anything derived from
    a block and its dependency closure is the same in every view that
    accepted that block.
    """

    def __init__(self, slots_per_epoch: int, validators: ValidatorSet):
        self.C = slots_per_epoch
        self.validators = validators
        self.closures: dict[str, tuple[frozenset, frozenset]] = {}
        self.included: dict[str, frozenset] = {}
        self.ebbs: dict[tuple[str, int], str] = {}
        self.chain_justified: dict[str, tuple[frozenset, Optional[CheckpointPair], bool]] = {}
        # messages that already passed the static checks, and dynamic verdicts by id
        self.verified: dict[str, "Message"] = {}
        self.dynamic: dict[str, Optional[str]] = {}


class View:
    """Accepted messages plus the pending buffer of one observer."""

    def __init__(
        self,
        slots_per_epoch: int,
        validators: Union[ValidatorSet, int],
        *,
        clock: float = math.inf,
        honor_timestamps: bool = True,
        cache: Optional[DerivedCache] = None,
        genesis: Optional[Block] = None,
    ):
        if slots_per_epoch < 1:
            raise ValueError("slots_per_epoch must be positive")
        if isinstance(validators, int):
            validators = ValidatorSet.uniform(validators)
        self.C = slots_per_epoch
        self.validators = validators
        if cache is None:
            cache = DerivedCache(slots_per_epoch, validators)
        elif cache.C != slots_per_epoch or cache.validators.stakes != validators.stakes:
            raise ValueError("shared cache built for different parameters")
        self.cache = cache
        self.clock = clock
        self.honor_timestamps = honor_timestamps
        self.blocks: dict[str, Block] = {}
        self.children: dict[str, list[str]] = {}
        self.attestations: dict[str, Attestation] = {}
        self.by_author: dict[int, list[Attestation]] = defaultdict(list)
        self.order: list[str] = []
        self.pending: dict[str, list[Message]] = defaultdict(list)
        self.pending_ids: dict[str, Message] = {}
        self.rejected: dict[str, str] = {}
        self._future: list[tuple[float, int, Message]] = []
        self._future_ids: set[str] = set()
        self._seq = 0
        self.deliver(genesis or make_genesis())

    # -- basic queries -------------------------------------------------

    @property
    def genesis(self) -> str:
        return GENESIS_ID

    @property
    def total_stake(self) -> float:
        return self.validators.total

    def epoch(self, slot: int) -> int:
        return slot // self.C

    def __contains__(self, mid: str) -> bool:
        return mid in self.blocks or mid in self.attestations

    def message(self, mid: str) -> Message:
        if mid in self.blocks:
            return self.blocks[mid]
        return self.attestations[mid]

    def block(self, bid: str) -> Block:
        try:
            return self.blocks[bid]
        except KeyError:
            raise UnknownBlock(bid) from None

    def leaves(self) -> list[str]:
        return sorted(b for b, kids in self.children.items() if not kids)

    def accepted_messages(self) -> list[Message]:
        return [self.message(m) for m in self.order]

    def pending_messages(self) -> list[Message]:
        return list(self.pending_ids.values())

    # -- delivery -------------------------------------------------------

    def deliver(self, msg: Message) -> list[str]:
        """Offer a message; return ids accepted as a result, in order."""
        if msg.id in self or msg.id in self.pending_ids or msg.id in self._future_ids:
            return []
        if msg.id in self.rejected:
            return []
        if self.cache.verified.get(msg.id) is not msg:
            try:
                self._check_static(msg)
            except MalformedMessage as exc:
                self.rejected[msg.id] = str(exc)
                raise
            self.cache.verified[msg.id] = msg
        if self.honor_timestamps and msg.timestamp > self.clock:
            self._seq += 1
            heapq.heappush(self._future, (msg.timestamp, self._seq, msg))
            self._future_ids.add(msg.id)
            return []
        return self._offer(msg)

    def advance_clock(self, now: float) -> list[str]:
        """Move the local clock forward and release held messages."""
        self.clock = max(self.clock, now) if self.clock != math.inf else now
        out: list[str] = []
        while self._future and self._future[0][0] <= self.clock:
            _, _, msg = heapq.heappop(self._future)
            self._future_ids.discard(msg.id)
            out.extend(self._offer(msg))
        return out

    def _offer(self, msg: Message) -> list[str]:
        missing = next((d for d in msg.deps if d not in self), None)
        if missing is not None:
            if missing in self.rejected:
                self.rejected[msg.id] = f"depends on rejected message {missing}"
                return []
            self.pending[missing].append(msg)
            self.pending_ids[msg.id] = msg
            return []
        accepted: list[str] = []
        queue = [msg]
        while queue:
            m = queue.pop(0)
            self.pending_ids.pop(m.id, None)
            if m.id in self.cache.dynamic:
                reason = self.cache.dynamic[m.id]
            else:
                reason = self.cache.dynamic[m.id] = self._check_dynamic(m)
            if reason is not None:
                self._reject(m, reason)
                continue
            self._accept(m)
            accepted.append(m.id)
            for waiting in self.pending.pop(m.id, []):
                nxt = next((d for d in waiting.deps if d not in self), None)
                if nxt is None:
                    queue.append(waiting)
                elif nxt in self.rejected:
                    self._reject(waiting, f"depends on rejected message {nxt}")
                else:
                    self.pending[nxt].append(waiting)
        return accepted

    def _reject(self, msg: Message, reason: str) -> None:
        self.pending_ids.pop(msg.id, None)
        self.rejected[msg.id] = reason
        for waiting in self.pending.pop(msg.id, []):
            self._reject(waiting, f"depends on rejected message {msg.id}")

    def _check_static(self, msg: Message) -> None:
        if msg.id != expected_id(msg):
            raise MalformedMessage(f"id {msg.id} does not match content")
        if isinstance(msg, Block):
            if msg.parent is None:
                if msg.slot != 0 or msg.newattests:
                    raise MalformedMessage("genesis must have slot 0 and no attestations")
            elif msg.slot <= 0:
                raise MalformedMessage(f"block {msg.id} has non-positive slot {msg.slot}")
            if len(set(msg.newattests)) != len(msg.newattests):
                raise MalformedMessage(f"block {msg.id} includes an attestation twice")
        else:
            if not 0 <= msg.author < len(self.validators):
                raise MalformedMessage(f"attestation {msg.id} has unknown author {msg.author}")
            if msg.target.aep != self.epoch(msg.slot):
                raise MalformedMessage(
                    f"attestation {msg.id}: target epoch {msg.target.aep} != epoch of slot {msg.slot}"
                )
            if msg.source.aep >= msg.target.aep and msg.source != msg.target:
                raise MalformedMessage(f"attestation {msg.id}: source epoch not below target epoch")

    def _check_dynamic(self, msg: Message) -> Optional[str]:
        """Checks that need the dependencies; returns a reason or None."""
        if isinstance(msg, Block):
            if msg.parent is None:
                return None
            parent = self.blocks[msg.parent]
            if parent.slot >= msg.slot:
                return f"parent slot {parent.slot} >= block slot {msg.slot}"
            for a in msg.newattests:
                if self.attestations[a].slot >= msg.slot:
                    return f"included attestation {a} is not older than the block"
            return None
        vote = self.blocks[msg.ghost_vote]
        if vote.slot > msg.slot:
            return f"vote block slot {vote.slot} > attestation slot {msg.slot}"
        tgt, src = msg.target, msg.source
        if tgt.block not in self.blocks or not self.is_ancestor(tgt.block, msg.ghost_vote):
            return "target block is not on the chain of the vote"
        if self.blocks[tgt.block].slot > tgt.aep * self.C:
            return "target pair epoch precedes its block"
        if src.block not in self.blocks or not self.is_ancestor(src.block, tgt.block):
            return "source block is not on the chain of the target"
        if self.blocks[src.block].slot > src.aep * self.C:
            return "source pair epoch precedes its block"
        return None

    def _accept(self, msg: Message) -> None:
        self.order.append(msg.id)
        if isinstance(msg, Block):
            self.blocks[msg.id] = msg
            self.children[msg.id] = []
            if msg.parent is not None:
                self.children[msg.parent].append(msg.id)
        else:
            self.attestations[msg.id] = msg
            self.by_author[msg.author].append(msg)

    # -- chain queries --------------------------------------------------

    def parent(self, bid: str) -> Optional[str]:
        return self.block(bid).parent

    def chain(self, bid: str) -> list[str]:
        out = []
        cur: Optional[str] = bid
        self.block(bid)
        while cur is not None:
            out.append(cur)
            cur = self.blocks[cur].parent
        out.reverse()
        return out

    def is_ancestor(self, a: str, b: str) -> bool:
        """True if a is b or an ancestor of b."""
        self.block(a)
        target_slot = self.blocks[a].slot
        cur: Optional[str] = b
        self.block(b)
        while cur is not None and self.blocks[cur].slot >= target_slot:
            if cur == a:
                return True
            cur = self.blocks[cur].parent
        return False

    def conflicts(self, a: str, b: str) -> bool:
        return not (self.is_ancestor(a, b) or self.is_ancestor(b, a))

    def ebb_block(self, bid: str, j: int) -> str:
        key = (bid, j)
        hit = self.cache.ebbs.get(key)
        if hit is not None:
            return hit
        self.block(bid)
        limit = j * self.C
        cur = bid
        while self.blocks[cur].slot > limit:
            cur = self.blocks[cur].parent  # genesis has slot 0, so this terminates
        self.cache.ebbs[key] = cur
        return cur

    def ebb(self, bid: str, j: int) -> CheckpointPair:
        return CheckpointPair(self.ebb_block(bid, j), j)

    def lebb(self, bid: str, epoch: Optional[int] = None) -> CheckpointPair:
        if epoch is None:
            epoch = self.epoch(self.block(bid).slot)
        return self.ebb(bid, epoch)

    def closure(self, bid: str) -> tuple[frozenset, frozenset]:
        """Block ids and attestation ids in the dependency closure of a block."""
        cache = self.cache.closures
        if bid in cache:
            return cache[bid]
        self.block(bid)
        stack = [bid]
        while stack:
            x = stack[-1]
            if x in cache:
                stack.pop()
                continue
            blk = self.blocks[x]
            deps = [] if blk.parent is None else [blk.parent]
            deps += [self.attestations[a].ghost_vote for a in blk.newattests]
            missing = [d for d in deps if d not in cache]
            if missing:
                stack.extend(missing)
                continue
            stack.pop()
            blocks = {x}
            atts = set(blk.newattests)
            for d in deps:
                b2, a2 = cache[d]
                blocks |= b2
                atts |= a2
            cache[x] = (frozenset(blocks), frozenset(atts))
        return cache[bid]

    def included(self, bid: str) -> frozenset:
        """Attestation ids included by blocks on chain(bid)."""
        cache = self.cache.included
        if bid in cache:
            return cache[bid]
        todo = []
        cur: Optional[str] = bid
        while cur is not None and cur not in cache:
            todo.append(cur)
            cur = self.block(cur).parent
        acc = cache[cur] if cur is not None else frozenset()
        for x in reversed(todo):
            acc = acc | frozenset(self.blocks[x].newattests)
            cache[x] = acc
        return cache[bid]

    def subview(self, block_ids: Iterable[str], att_ids: Iterable[str]) -> "View":
        """A new view holding the given messages, in this view's acceptance order."""
        keep = set(block_ids) | set(att_ids)
        sub = View(self.C, self.validators, cache=self.cache, honor_timestamps=False)
        for mid in self.order:
            if mid in keep and mid != GENESIS_ID:
                sub.deliver(self.message(mid))
        return sub

    def copy(self) -> "View":
        clone = View(self.C, self.validators, clock=self.clock,
                     honor_timestamps=self.honor_timestamps, cache=self.cache)
        for mid in self.order[1:]:
            clone._accept(self.message(mid))
        for msg in self.pending_ids.values():
            clone._offer(msg)
        clone.rejected = dict(self.rejected)
        for ts, _, msg in sorted(self._future):
            clone._seq += 1
            heapq.heappush(clone._future, (ts, clone._seq, msg))
            clone._future_ids.add(msg.id)
        return clone


# Module-level spellings of the view queries.

def deliver(view: View, msg: Message) -> list[str]:
    return view.deliver(msg)


def chain(view: View, b: str) -> list[str]:
    return view.chain(b)


def conflicts(view: View, a: str, b: str) -> bool:
    return view.conflicts(a, b)


def ebb(view: View, b: str, j: int) -> CheckpointPair:
    return view.ebb(b, j)


def lebb(view: View, b: str, epoch: Optional[int] = None) -> CheckpointPair:
    return view.lebb(b, epoch)


def block_view(view: View, b: str) -> View:
    """view(B): the block together with its full dependency closure."""
    blocks, atts = view.closure(b)
    return view.subview(blocks, atts)


def ffg_view(view: View, b: str) -> View:
    return block_view(view, view.lebb(b).block)
