"""Command-line entry point.

Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
fuzz run finds a property violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .analytics import (
    finalization_failure_upper,
    justification_event_bound,
    justification_liveness_bound,
    no_finalization_prob,
    table1,
)
from .config import ConfigError, Scenario, load_scenario
from .snapshot import SnapshotError, load_view, save_view

SEED_ENV = "GASPERLAB_SEED"


class Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; this tool reserves 2 for violations."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def resolve_seed(cli_seed: Optional[int], config_seed: Optional[int]) -> int:
    """--seed beats the scenario file, which beats the environment, which beats 0."""
    if cli_seed is not None:
        return cli_seed
    if config_seed is not None:
        return config_seed
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}: expected an integer, got {env!r}") from None
    return 0


def _scenario(args) -> Scenario:
    return load_scenario(args.config) if getattr(args, "config", None) else Scenario()


def _header(command: str, seed: Optional[int], config: dict) -> str:
    """Comment lines recording how an output was produced."""
    lines = [f"# gasperlab {__version__} {command}"]
    if seed is not None:
        lines.append(f"# seed={seed}")
    lines.append("# config=" + json.dumps(config, sort_keys=True))
    return "\n".join(lines) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(rows: list, header: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x: float) -> str:
    return repr(float(x))


# -- simulate ------------------------------------------------------------


def cmd_simulate(args) -> int:
    from .simulator import run

    scen = _scenario(args)
    seed = resolve_seed(args.seed, scen.seed if scen.seed is not None else scen.simulation.get("seed"))
    overrides = {"seed": seed}
    for flag, key in (("validators", "validator_count"), ("slots_per_epoch", "slots_per_epoch"),
                      ("byz", "byz_count"), ("strategy", "strategy"), ("epochs", "epochs")):
        val = getattr(args, flag)
        if val is not None:
            overrides[key] = val
    net = dict(scen.network)
    for key in ("a", "eps1", "eps2"):
        val = getattr(args, key)
        if val is not None:
            net[key] = val
    scen.network = net
    cfg = scen.sim_config(**overrides)
    trace = run(cfg)
    resolved = cfg.to_dict()
    resolved["byzantine"] = trace.byzantine
    metric_keys = list(trace.metrics[0]) if trace.metrics else ["epoch"]
    metrics = _csv([[m[k] for k in metric_keys] for m in trace.metrics], metric_keys)
    if not args.out:
        sys.stdout.write(_header("simulate", seed, resolved) + metrics)
        return 0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps({"seed": seed, "config": resolved}, indent=2, sort_keys=True) + "\n")
    (out / "metrics.csv").write_text(_header("simulate", seed, resolved) + metrics)
    with open(out / "events.jsonl", "w") as fh:
        for ev in trace.events:
            fh.write(json.dumps(ev, sort_keys=True) + "\n")
    save_view(trace.network_view, out / "network_view.snap")
    print(f"wrote {len(trace.events)} events and {len(trace.metrics)} epochs of metrics to {out}")
    return 0


# -- equivocation game ---------------------------------------------------


def cmd_equiv_game(args) -> int:
    from .equiv_game import REGIMES, estimate_win_rate

    scen = _scenario(args)
    seed = resolve_seed(args.seed, scen.seed if scen.seed is not None else scen.equiv_game.get("seed"))
    base = {"seed": seed}
    if args.trials is not None:
        base["trials"] = args.trials
    if args.random_split:
        base["random_split"] = True
    if args.honor_claims:
        base["honor_claimed_timestamps"] = True
    if args.abstain:
        base["dishonest_vote_time"] = None
    elif args.dishonest_time is not None:
        base["dishonest_vote_time"] = args.dishonest_time
    for key in ("a", "eps1", "eps2"):
        val = getattr(args, key)
        if val is not None:
            base[key] = val

    if args.matrix:
        points = [("pessimistic", t) for t in (0.2, 0.3, 0.4, 0.5)]
        points += [("inbetween", t) for t in (0.3, 0.4, 0.5)]
        points += [("optimistic", t) for t in (0.2, 0.5)]
        configs = [(name, scen.equiv_config(**{**base, **REGIMES[name], "dishonest_vote_time": t}))
                   for name, t in points]
    else:
        configs = [("custom", scen.equiv_config(**base))]

    rows = []
    for name, cfg in configs:
        res = estimate_win_rate(cfg, parallel=args.parallel_trials)
        t = "abstain" if cfg.dishonest_vote_time is None else _fmt(cfg.dishonest_vote_time)
        rows.append([name, cfg.n, cfg.n_honest, cfg.n_byzantine, _fmt(cfg.a), _fmt(cfg.eps1), _fmt(cfg.eps2),
                     t, cfg.trials, res.wins, f"{res.rate:.6f}"])
    header = ["regime", "N", "honest", "byzantine", "a", "eps1", "eps2", "dishonest_time",
              "trials", "wins", "win_rate"]
    resolved = configs[0][1].to_dict() if len(configs) == 1 else {"base": base, "matrix": [p[0] for p in configs]}
    text = _header("equiv-game", seed, resolved) + _csv(rows, header)
    _emit(text, args.out)
    if args.out and len(rows) == 1:
        print(f"win rate {rows[0][-1]}")
    return 0


# -- analytics -----------------------------------------------------------


def cmd_analyze(args) -> int:
    if args.what == "table1":
        rows = [[n, p, repr(v)] for n, p, v in table1()]
        text = _header("analyze table1", None, {}) + _csv(rows, ["n", "p", "no_finalization_prob"])
    elif args.what == "bounds":
        cfg = {"C": args.C, "S": args.S, "eps": args.eps, "r": args.r}
        rows = [[
            args.C, args.S, _fmt(args.eps),
            repr(justification_event_bound(args.C, args.S, args.eps, "weak")),
            repr(justification_event_bound(args.C, args.S, args.eps, "tight")),
            repr(justification_liveness_bound(args.r, args.C, args.S, args.eps)),
        ]]
        text = _header("analyze bounds", None, cfg) + _csv(
            rows, ["C", "S", "eps", "event_bound_weak", "event_bound_tight", "justification_bound"])
    else:
        if args.n < 1 or not 0 <= args.p <= 1:
            raise ConfigError("finalization needs --n >= 1 and --p in [0, 1]")
        cfg = {"n": args.n, "p": args.p}
        rows = [[n, _fmt(args.p), repr(no_finalization_prob(n, args.p)),
                 repr(finalization_failure_upper(n, args.p)) if args.p >= 0.5 else ""]
                for n in range(1, args.n + 1)]
        text = _header("analyze finalization", None, cfg) + _csv(
            rows, ["n", "p", "no_finalization_prob", "asymptotic_bound"])
    _emit(text, args.out)
    return 0


# -- snapshot tools ------------------------------------------------------


def cmd_fork_choice(args) -> int:
    from .fork_choice import hlmd_prototype_result, hlmd_result, lmd_ghost_result

    view = load_view(args.snapshot)
    rule = {"hlmd": hlmd_result, "lmd": lmd_ghost_result, "prototype": hlmd_prototype_result}[args.rule]
    res = rule(view)
    lines = [f"rule {args.rule}", f"start {res.start.block}@{res.start.aep}", f"tie {str(res.tie).lower()}"]
    for bid in res.path:
        lines.append(f"step {bid} slot={view.blocks[bid].slot} weight={_fmt(res.weights[bid])}")
    lines.append(f"head {res.head}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _pairs(pairs) -> list[str]:
    return [f"{p.block}@{p.aep}" for p in sorted(pairs, key=lambda p: p.key())]


def cmd_finality(args) -> int:
    from .ffg import finalized_depths, finalized_four_case, justified

    view = load_view(args.snapshot)
    js = justified(view)
    depths = finalized_depths(view, js)
    rows = [["justified", p, ""] for p in _pairs(js)]
    for p in sorted(depths, key=lambda p: p.key()):
        rows.append(["finalized", f"{p.block}@{p.aep}", depths[p]])
    rows += [["finalized_four_case", p, ""] for p in _pairs(finalized_four_case(view))]
    _emit(_csv(rows, ["set", "pair", "k"]), args.out)
    return 0


def cmd_slash_scan(args) -> int:
    from .slashing import detect

    view = load_view(args.snapshot)
    evidence, stake = detect(view)
    rows = [[e.author, e.kind.value, e.first.id, e.second.id] for e in evidence]
    text = _csv(rows, ["author", "violation", "first", "second"])
    text += f"# slashable_stake={_fmt(stake)} total_stake={_fmt(view.total_stake)}\n"
    _emit(text, args.out)
    return 0


# -- fuzz ----------------------------------------------------------------


def cmd_fuzz(args) -> int:
    from .simulator import fuzz

    scen = _scenario(args)
    seed = resolve_seed(args.seed, scen.seed)
    bad: list[str] = []
    if args.property == "liveness":
        rep = fuzz.fuzz_plausible_liveness(seed, args.cases, args.parallel_trials)
        for c in rep.failures:
            bad.append(f"case {c.index}: {c.reason} (strategy {c.strategy}, {c.pre_epochs} adversarial epochs)")
        summary = f"{len(rep.cases)} cases, {rep.honest_attestations} honest attestations"
    elif args.property == "safety":
        rep = fuzz.fuzz_conflicting_finality(seed, args.cases, args.parallel_trials)
        for c in rep.failures:
            bad.append(f"case {c.index}: slashable {c.slashable:.4f} of {c.total:.4f}")
        summary = f"{len(rep.cases)} cases, {rep.conflicting} with conflicting finalization"
    else:
        runs = fuzz.innocence_sweep(seed, args.cases, args.parallel_trials)
        for r in runs:
            if r.honest_evidence:
                bad.append(f"run {r.index}: {r.honest_evidence} pieces of evidence against honest validators")
        summary = f"{len(runs)} runs, {sum(r.honest_attestations for r in runs)} honest attestations"
    print(f"fuzz {args.property} seed={seed}: {summary}, {len(bad)} violations")
    for line in bad:
        print(f"VIOLATION seed={seed} {line}")
    return 2 if bad else 0


# -- wiring --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = Parser(prog="gasperlab", description="Gasper consensus laboratory.")
    p.add_argument("--version", action="version", version=f"gasperlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    s = sub.add_parser("simulate", help="run the discrete-event simulator")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output directory; metrics go to stdout when omitted")
    s.add_argument("--validators", type=int)
    s.add_argument("--slots-per-epoch", type=int)
    s.add_argument("--byz", type=int)
    s.add_argument("--strategy")
    s.add_argument("--epochs", type=int)
    for key in ("a", "eps1", "eps2"):
        s.add_argument(f"--{key}", type=float)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("equiv-game", help="estimate the equivocation-game win rate")
    e.add_argument("--config")
    e.add_argument("--seed", type=int)
    e.add_argument("--out")
    e.add_argument("--trials", type=int)
    e.add_argument("--parallel-trials", type=int, default=1)
    for key in ("a", "eps1", "eps2"):
        e.add_argument(f"--{key}", type=float)
    e.add_argument("--dishonest-time", type=float)
    e.add_argument("--abstain", action="store_true", help="dishonest validators do not vote")
    e.add_argument("--random-split", action="store_true", help="assign dishonest votes by coin flip")
    e.add_argument("--honor-claims", action="store_true",
                   help="hide votes from anyone whose clock is before their claimed timestamp")
    e.add_argument("--matrix", action="store_true", help="run all regimes and voting times")
    e.set_defaults(func=cmd_equiv_game)

    a = sub.add_parser("analyze", help="closed-form liveness quantities")
    a.add_argument("what", choices=("table1", "bounds", "finalization"))
    a.add_argument("--C", type=int, default=64)
    a.add_argument("--S", type=int, default=900)
    a.add_argument("--eps", type=float, default=30.0)
    a.add_argument("--r", type=float, default=1.0)
    a.add_argument("--n", type=int, default=20)
    a.add_argument("--p", type=float, default=0.5)
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    for name, func, helptext in (("fork-choice", cmd_fork_choice, "print the head of a view snapshot"),
                                 ("finality", cmd_finality, "list justified and finalized pairs"),
                                 ("slash-scan", cmd_slash_scan, "list slashing evidence")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("snapshot")
        c.add_argument("--out")
        if name == "fork-choice":
            c.add_argument("--rule", choices=("hlmd", "lmd", "prototype"), default="hlmd")
        c.set_defaults(func=func)

    f = sub.add_parser("fuzz", help="randomized property checks")
    f.add_argument("property", choices=("liveness", "safety", "innocence"))
    f.add_argument("--cases", type=int, default=100)
    f.add_argument("--config")
    f.add_argument("--seed", type=int)
    f.add_argument("--parallel-trials", type=int, default=1)
    f.set_defaults(func=cmd_fuzz)
    return p


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "parallel_trials", 1) < 1:
            raise ConfigError("--parallel-trials must be at least 1")
        return args.func(args)
    except (ConfigError, SnapshotError, ValueError, OSError) as exc:
        print(f"gasperlab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
