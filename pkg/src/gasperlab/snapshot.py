"""Line-oriented text format for views.

Layout::

    gasperlab-view 1
    slots_per_epoch 4
    stakes 1.0 1.0 1.0
    clock inf
    honor_timestamps 0
    block id=... slot=3 parent=... proposer=2 ts=3.0 payload=- atts=a,b deps=p,a,b
    att id=... author=1 slot=3 vote=... source=<id>@0 target=<id>@0 ts=3.5 deps=...

Accepted messages come first in acceptance order, then pending and
clock-held messages. Importing replays the lines through ``deliver`` so the
loaded view re-derives the same accepted/pending split, and exporting the
result reproduces the input text exactly.
"""

from __future__ import annotations

from typing import Union

from .chain_store import (
    Attestation,
    Block,
    CheckpointPair,
    GENESIS_ID,
    Message,
    ValidatorSet,
    View,
)

MAGIC = "gasperlab-view 1"


class SnapshotError(ValueError):
    pass


def _pair(p: CheckpointPair) -> str:
    return f"{p.block}@{p.aep}"


def _parse_pair(text: str) -> CheckpointPair:
    block, _, aep = text.partition("@")
    if not block or not aep:
        raise SnapshotError(f"bad checkpoint pair {text!r}")
    return CheckpointPair(block, int(aep))


def message_line(msg: Message) -> str:
    deps = ",".join(msg.deps) or "-"
    if isinstance(msg, Block):
        return (
            f"block id={msg.id} slot={msg.slot} parent={msg.parent or '-'}"
            f" proposer={'-' if msg.proposer is None else msg.proposer}"
            f" ts={msg.timestamp!r} payload={msg.payload.hex() or '-'}"
            f" atts={','.join(msg.newattests) or '-'} deps={deps}"
        )
    return (
        f"att id={msg.id} author={msg.author} slot={msg.slot} vote={msg.ghost_vote}"
        f" source={_pair(msg.source)} target={_pair(msg.target)}"
        f" ts={msg.timestamp!r} deps={deps}"
    )


def parse_message(line: str) -> Message:
    kind, *rest = line.split()
    fields = {}
    for item in rest:
        key, sep, value = item.partition("=")
        if not sep:
            raise SnapshotError(f"field without value: {item!r}")
        fields[key] = value
    try:
        if kind == "block":
            parent = None if fields["parent"] == "-" else fields["parent"]
            msg: Message = Block(
                id=fields["id"],
                slot=int(fields["slot"]),
                parent=parent,
                newattests=() if fields["atts"] == "-" else tuple(fields["atts"].split(",")),
                proposer=None if fields["proposer"] == "-" else int(fields["proposer"]),
                payload=b"" if fields["payload"] == "-" else bytes.fromhex(fields["payload"]),
                timestamp=float(fields["ts"]),
            )
        elif kind == "att":
            msg = Attestation(
                id=fields["id"],
                author=int(fields["author"]),
                slot=int(fields["slot"]),
                ghost_vote=fields["vote"],
                source=_parse_pair(fields["source"]),
                target=_parse_pair(fields["target"]),
                timestamp=float(fields["ts"]),
            )
        else:
            raise SnapshotError(f"unknown record kind {kind!r}")
    except KeyError as exc:
        raise SnapshotError(f"{kind} record missing field {exc.args[0]}") from None
    deps = fields.get("deps", "-")
    if (",".join(msg.deps) or "-") != deps:
        raise SnapshotError(f"declared dependencies of {msg.id} do not match its fields")
    return msg


def export_view(view: View) -> str:
    lines = [
        MAGIC,
        f"slots_per_epoch {view.C}",
        "stakes " + " ".join(repr(s) for s in view.validators.stakes),
        f"clock {view.clock!r}",
        f"honor_timestamps {int(view.honor_timestamps)}",
    ]
    lines += [message_line(view.message(m)) for m in view.order]
    lines += [message_line(m) for m in view.pending_ids.values()]
    lines += [message_line(m) for _, _, m in sorted(view._future, key=lambda e: (e[0], e[1]))]
    return "\n".join(lines) + "\n"


def import_view(text: Union[str, bytes]) -> View:
    if isinstance(text, bytes):
        text = text.decode()
    lines = text.splitlines()
    if not lines or lines[0] != MAGIC:
        raise SnapshotError("not a gasperlab view snapshot")
    header = {}
    body_start = 1
    for body_start in range(1, len(lines)):
        line = lines[body_start]
        if line.startswith(("block ", "att ")):
            break
        key, _, value = line.partition(" ")
        header[key] = value
    else:
        body_start = len(lines)
    try:
        C = int(header["slots_per_epoch"])
        stakes = ValidatorSet(tuple(float(s) for s in header["stakes"].split()))
        clock = float(header.get("clock", "inf"))
        honor = header.get("honor_timestamps", "0") == "1"
    except KeyError as exc:
        raise SnapshotError(f"missing header {exc.args[0]}") from None
    msgs = [parse_message(line) for line in lines[body_start:] if line.strip()]
    genesis = next((m for m in msgs if isinstance(m, Block) and m.parent is None), None)
    if genesis is None or genesis.id != GENESIS_ID:
        raise SnapshotError("snapshot has no genesis record")
    view = View(C, stakes, clock=clock, honor_timestamps=honor, genesis=genesis)
    for m in msgs:
        if m.id != GENESIS_ID:
            view.deliver(m)
    return view


def load_view(path) -> View:
    with open(path, "r", encoding="utf-8") as fh:
        return import_view(fh.read())


def save_view(view: View, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(export_view(view))
