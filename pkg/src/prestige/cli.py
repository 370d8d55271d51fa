"""``prestige-sim`` command line: scenarios, the passive baseline, golden vectors, split votes.

Exit codes: 0 success, 1 usage error, 2 invariant-audit failure,
3 golden-vector failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import vectors
from .ledger import LedgerError
from .sim.config import ConfigError, ScenarioConfig
from .sim.scenario import run_scenario, split_vote_study

EXIT_OK, EXIT_USAGE, EXIT_AUDIT, EXIT_GOLDEN = 0, 1, 2, 3

log = logging.getLogger("prestige")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _json_default(obj):
    if isinstance(obj, bytes):
        return obj.hex()
    if isinstance(obj, (set, frozenset, tuple)):
        return sorted(obj) if isinstance(obj, (set, frozenset)) else list(obj)
    return str(obj)


def _out_dir(path: str | None) -> Path:
    out = Path(path or "out")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _write_manifest(out: Path, command: str, **fields) -> None:
    # the only file whose bytes depend on wall-clock time
    manifest = {"generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"), "command": command, **fields}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default) + "\n")


def _load_config(args) -> ScenarioConfig:
    if not args.config:
        return ScenarioConfig()
    try:
        return ScenarioConfig.load(args.config)
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc


def write_run_artifacts(result, out: Path, trace: bool = False, ledger_dump: bool = False) -> None:
    metrics = dict(result.metrics)
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True, default=_json_default) + "\n")
    with open(out / "throughput.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["second", "committed_tx"])
        for sec, count in enumerate(result.throughput):
            w.writerow([sec, count])
    with open(out / "rp_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["view", "leader", "server", "rp", "ci"])
        for row in metrics["rp_trace"]:
            for sid, rp in row["rp"].items():
                w.writerow([row["view"], row["leader"], sid, rp, row["ci"][sid]])
    if trace:
        with open(out / "trace.jsonl", "w") as fh:
            for ev in result.trace:
                fh.write(json.dumps(ev, sort_keys=True, default=_json_default) + "\n")
    if ledger_dump:
        dump = {"vc_chain": [{"view": b.v, "leader": b.leader_id, "rp": b.rp_map, "ci": b.ci_map,
                              "refreshes": [r.server_id for r in b.refreshes]} for b in result.final_chain()],
                "heights": {s.id: s.ledger.height for s in result.servers}}
        (out / "ledger.json").write_text(json.dumps(dump, indent=2, sort_keys=True, default=_json_default) + "\n")


def _simulate_one(job):
    cfg, seed, out, trace, ledger_dump = job
    result = run_scenario(cfg, seed)
    write_run_artifacts(result, out, trace, ledger_dump)
    return seed, result.metrics.get("audit_ok", True), result.metrics["throughput_mean"], result.metrics["availability"]


def cmd_simulate(args, protocol: str | None = None) -> int:
    cfg = _load_config(args)
    if protocol is not None:
        cfg = cfg.replace(protocol=protocol)
    base = cfg.seed if args.seed is None else args.seed
    seeds = [base + i for i in range(args.runs)]
    out = _out_dir(args.out)
    jobs = []
    for seed in seeds:
        target = out if len(seeds) == 1 else out / f"seed-{seed}"
        target.mkdir(parents=True, exist_ok=True)
        jobs.append((cfg, seed, target, args.trace, args.ledger_dump))
    if args.jobs > 1 and len(jobs) > 1:
        from multiprocessing import Pool
        with Pool(args.jobs) as pool:
            rows = pool.map(_simulate_one, jobs)
    else:
        rows = [_simulate_one(j) for j in jobs]
    _write_manifest(out, args.command, config=cfg.to_dict(), seeds=seeds)
    clean = True
    for seed, ok, tput, avail in rows:
        print(f"seed={seed} throughput={tput:.1f} tx/s availability={avail:.3f} audit={'ok' if ok else 'FAILED'}")
        clean &= bool(ok)
    return EXIT_OK if clean else EXIT_AUDIT


def cmd_rep_vectors(args) -> int:
    try:
        cases = vectors.load_cases(args.cases) if args.cases else vectors.BUILTIN_CASES
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot read case file: {exc}") from exc
    outcomes = vectors.run_cases(cases)
    for o in outcomes:
        print(json.dumps(o.to_dict()))
    if args.out:
        out = _out_dir(args.out)
        (out / "rep_vectors.json").write_text(json.dumps([o.to_dict() for o in outcomes], indent=2) + "\n")
        _write_manifest(out, args.command, cases=args.cases or "builtin")
    failed = [o.case.name for o in outcomes if not o.ok]
    if failed:
        print(f"golden-vector failures: {', '.join(failed)}", file=sys.stderr)
        return EXIT_GOLDEN
    return EXIT_OK


def cmd_split_votes(args) -> int:
    seed = 1 if args.seed is None else args.seed
    attacks = {"off": [False], "on": [True], "both": [False, True]}[args.attack]
    rows = []
    for n in args.n:
        if n < 4 or (n - 1) % 3:
            raise UsageError(f"n must be 3f+1, got {n}")
        for eps in args.eps:
            for attack in attacks:
                row = split_vote_study(n, eps, args.trials, seed, attack, args.jobs)
                rows.append(row)
                log.info("n=%d eps=%s attack=%s: %d split votes", n, eps, attack, row["split_votes"])
    fields = ["n", "epsilon", "attack", "trials", "view_changes", "split_votes"]
    writer = csv.DictWriter(sys.stdout, fieldnames=fields)
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        out = _out_dir(args.out)
        with open(out / "split_votes.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            w.writerows(rows)
        _write_manifest(out, args.command, seed=seed, trials=args.trials)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file (ScenarioConfig fields)")
    common.add_argument("--seed", type=int, help="root seed; overrides the config")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for independent seeds or trials")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="prestige-sim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, helptext in (("simulate", "run a scenario"), ("baseline", "run a scenario with the passive protocol")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--runs", type=int, default=1, help="consecutive seeds starting at --seed")
        p.add_argument("--trace", action="store_true", help="also write trace.jsonl")
        p.add_argument("--ledger-dump", action="store_true", help="also write ledger.json")
    p = sub.add_parser("rep-vectors", parents=[common], help="check reputation cases")
    p.add_argument("--cases", help="JSON list of cases; defaults to the built-in suite")
    p = sub.add_parser("split-votes", parents=[common], help="count split votes over forced view changes")
    p.add_argument("--n", type=int, nargs="+", default=[4])
    p.add_argument("--eps", type=float, nargs="+", default=[0.0, 50.0, 150.0])
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--attack", choices=["off", "on", "both"], default="both")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.jobs < 1 or getattr(args, "runs", 1) < 1:
        parser.error("--jobs and --runs must be >= 1")
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "baseline":
            return cmd_simulate(args, protocol="passive")
        if args.command == "rep-vectors":
            return cmd_rep_vectors(args)
        return cmd_split_votes(args)
    except UsageError as exc:
        print(f"prestige-sim: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LedgerError as exc:
        print(f"prestige-sim: ledger error: {exc}", file=sys.stderr)
        return EXIT_AUDIT


if __name__ == "__main__":
    sys.exit(main())
