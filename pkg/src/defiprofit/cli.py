"""Command-line front end: ``defiprofit <subcommand> ...``.

Exit codes: 0 success, 1 domain error (no route, bad spec, ...), 2 usage
error (bad flags, unreadable files). Every report starts with a metadata
header carrying the package version and a hash of the run configuration.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from pathlib import Path

from . import __version__, presets, snapshot
from .arbitrage import MAX_CYCLES, run_arb
from .errors import DefiError, InvalidSpec, UnsupportedVenueKind
from .mdp import MdpSpec, mev_threshold, sweep
from .optimizer import MIN_TARGET, optimize_revenue
from .paths import EXPANSION_CAP, enumerate_pruned
from .replay import CostModel, load_series, make_series, replay, save_series
from .smtlib import export_smtlib, smt_filename

log = logging.getLogger("defiprofit")

# flags that change how a run is executed or where it goes, not what it computes
_NOT_CONFIG = {"out", "log_level", "jobs", "func"}


class UsageError(Exception):
    pass


def config_hash(args: argparse.Namespace) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _meta(args) -> dict:
    return {"tool": "defiprofit", "version": __version__, "command": args.command,
            "config_hash": config_hash(args), "seed": args.seed}


def _csv_header(args) -> str:
    m = _meta(args)
    return "# " + " ".join(f"{k}={v}" for k, v in m.items()) + "\n"


def _emit(args, text: str):
    if args.out:
        p = Path(args.out)
        if p.parent and not p.parent.exists():
            p.parent.mkdir(parents=True)
        p.write_text(text)
    else:
        sys.stdout.write(text)


def _json(args, body: dict) -> str:
    return json.dumps({"meta": _meta(args), **body}, indent=2) + "\n"


def _load_state(ref: str):
    """A snapshot file, or the name of a bundled preset."""
    if Path(ref).exists():
        return snapshot.load_snapshot(ref)
    if ref in presets.STATES:
        return presets.STATES[ref]()
    raise UsageError(f"snapshot {ref!r} is neither a file nor a preset ({', '.join(presets.STATES)})")


def _load_catalog(ref: str):
    if ref in presets.CATALOGS or Path(ref).exists():
        return snapshot.load_catalog(ref)
    raise UsageError(f"catalog {ref!r} is neither a file nor a preset")


def _read_paths(ref: str) -> list[tuple[str, ...]]:
    lines = Path(ref).read_text().splitlines()
    return [tuple(line.split()) for line in lines if line.strip() and not line.startswith("#")]


def _strategy_dict(s) -> dict:
    return {"path": list(s.action_ids), "params": [float(x) for x in s.params],
            "revenue": float(s.revenue)}


# --- subcommands -----------------------------------------------------------

def cmd_arb(args):
    state = _load_state(args.snapshot)
    catalog = _load_catalog(args.catalog)
    res = run_arb(state, catalog, args.base, args.min_revenue, args.max_cycles)
    timings = {k: (1000 * v if args.timing else 0.0) for k, v in res.timings.items()}
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "committed", "path", "params", "revenue"])
        rows = [(True, s) for s in res.strategies] + [(False, s) for s in res.below_threshold]
        for i, (ok, s) in enumerate(rows):
            w.writerow([i, int(ok), " ".join(s.action_ids), " ".join(repr(float(x)) for x in s.params),
                        repr(float(s.revenue))])
        _emit(args, _csv_header(args) + buf.getvalue())
    else:
        _emit(args, _json(args, {
            "block": state.block_height,
            "strategies": [_strategy_dict(s) for s in res.strategies],
            "below_threshold": [_strategy_dict(s) for s in res.below_threshold],
            "total_revenue": res.total_revenue,
            "cycles": res.rounds,
            "cap_hit": res.cap_hit,
            "ms": timings,
        }))
    return 0


AFTER_TARGET = {2: 2, 3: 90, 4: 466, 5: 42}


def cmd_paths(args):
    catalog = _load_catalog(args.catalog)
    paths, stats = enumerate_pruned(catalog, args.base, args.max_len, args.cap, args.jobs)
    listing = "".join(" ".join(p) + "\n" for p in paths)
    if args.stats:
        lines = [_csv_header(args), "length,before,after\n"]
        lines += [f"{k},{b},{a}\n" for k, b, a in stats.rows()]
        lines.append(f"total,,{stats.total_after}\n")
        if args.catalog == "appendix-b-96":
            off = {k: (stats.after(k), t) for k, t in AFTER_TARGET.items()
                   if k in stats.counts and stats.after(k) != t}
            lines.append("# deviation from target after-counts: "
                         + (", ".join(f"len {k}: {a} vs {t}" for k, (a, t) in off.items()) or "none")
                         + "\n")
        sys.stdout.write("".join(lines))
        if args.out:
            Path(args.out).write_text(listing)
    else:
        _emit(args, listing)
    return 0


def cmd_search(args):
    state = _load_state(args.snapshot)
    catalog = _load_catalog(args.catalog)
    index = {a.action_id: a for a in catalog}
    if args.paths:
        ids = _read_paths(args.paths)
    else:
        ids, _ = enumerate_pruned(catalog, args.base, args.max_len)
    try:
        resolved = [tuple(index[a] for a in p) for p in ids]
    except KeyError as err:
        raise InvalidSpec(f"path uses unknown action {err.args[0]!r}") from None
    results = []
    for p in resolved:
        r = optimize_revenue(p, state, args.min_target, args.base, free_params=args.free_params)
        results.append((p, r))
        if args.export_smt:
            d = Path(args.export_smt)
            d.mkdir(parents=True, exist_ok=True)
            z = r.revenue if r is not None else args.min_target
            try:
                (d / smt_filename(p, state)).write_text(export_smtlib(p, state, z, args.base))
            except UnsupportedVenueKind as exc:
                log.warning("not exported: %s", exc)
    found = [(p, r) for p, r in results if r is not None]
    found.sort(key=lambda pr: (-round(pr[1].revenue, 12), len(pr[0]), [a.action_id for a in pr[0]]))
    _emit(args, _json(args, {
        "block": state.block_height,
        "evaluated": len(resolved),
        "profitable": [{"path": [a.action_id for a in p], "params": list(map(float, r.params)),
                        "revenue": r.revenue, "sat_probes": r.sat_probes} for p, r in found],
        "best": ({"path": [a.action_id for a in found[0][0]], "revenue": found[0][1].revenue}
                 if found else None),
    }))
    return 0 if found else 1


def cmd_replay(args):
    series = load_series(args.series)
    catalog = _load_catalog(args.catalog)
    paths = _read_paths(args.paths) if args.paths else None
    cost = CostModel(args.gas_gwei, args.gas_per_action, args.flash_fee)
    rep = replay(series, args.mode, cost, args.min_revenue, catalog, paths, args.base,
                 args.max_len, args.jobs, args.free_params)
    text = _csv_header(args) + rep.to_csv(timing=args.timing)
    _emit(args, text)
    log.info("gross %.6f net %.6f over %d blocks, %d discovery calls",
             rep.gross, rep.net, len(series), rep.discovery_calls)
    return 0


def _parse_sweep(text: str):
    name, _, rng = text.partition("=")
    if name != "alpha":
        raise UsageError("only alpha can be swept, e.g. alpha=0.05:0.45:0.05")
    try:
        lo, hi, step = (float(x) for x in rng.split(":"))
    except ValueError:
        raise UsageError(f"bad sweep range {rng!r}") from None
    n = int(round((hi - lo) / step)) + 1
    return [round(lo + i * step, 10) for i in range(n)]


def cmd_mdp(args):
    spec = MdpSpec(args.alpha, args.gamma, args.stale, args.k, args.omega, args.cm, args.cutoff)
    alphas = _parse_sweep(args.sweep) if args.sweep else [args.alpha]
    if args.sweep:
        rows = sweep(spec, alphas, args.margin, args.jobs)
    else:
        rows = [(spec.alpha, spec.r_s, mev_threshold(spec, args.margin))]
    body = "alpha,r_s,mev_v\n" + "".join(f"{a!r},{r!r},{m!r}\n" for a, r, m in rows)
    _emit(args, _csv_header(args) + body)
    return 0


def cmd_gen_snapshot(args):
    if args.preset == "appendix-b-96":
        state = presets.appendix_b_state(args.seed)
        catalog = presets.appendix_b_catalog(state)
    else:
        state, catalog = presets.preset(args.preset)
    if args.blocks > 1:
        if not args.out:
            raise UsageError("--blocks needs --out DIR")
        series, touched = make_series(state, args.blocks, args.touched, args.seed)
        save_series(series, args.out)
        snapshot.save_catalog(catalog, Path(args.out).parent / f"{Path(args.out).name}.catalog.json")
        meta = {**_meta(args), "touched": [series.heights[i] for i in touched]}
        (Path(args.out).parent / f"{Path(args.out).name}.meta.json").write_text(
            json.dumps(meta, indent=2) + "\n")
        return 0
    doc = {"meta": _meta(args), **snapshot.state_to_dict(state)}
    _emit(args, snapshot.dumps(doc))
    if args.catalog_out:
        snapshot.save_catalog(catalog, args.catalog_out)
    return 0


# --- parser ----------------------------------------------------------------

def _globals(defaults: bool) -> argparse.ArgumentParser:
    # accepted before and after the subcommand; only the top level sets
    # defaults so a later position cannot reset an earlier one
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--jobs", type=int, default=d(1), help="worker processes for parallel sections")
    g.add_argument("--seed", type=int, default=d(0))
    g.add_argument("--out", default=d(None), help="output file (directory for series)")
    g.add_argument("--log-level", default=d("WARNING"),
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return g


def build_parser() -> argparse.ArgumentParser:
    common = _globals(False)
    p = argparse.ArgumentParser(prog="defiprofit", parents=[_globals(True)],
                                description="Profit discovery over modelled DeFi venues.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help):
        sp = sub.add_parser(name, parents=[common], help=help, description=help)
        sp.set_defaults(func=func)
        return sp

    a = add("arb", cmd_arb, "greedy negative-cycle arbitrage on one snapshot")
    a.add_argument("--snapshot", required=True, help="snapshot JSON or preset name")
    a.add_argument("--catalog", required=True, help="catalog JSON or preset name")
    a.add_argument("--base", default="ETH")
    a.add_argument("--min-revenue", type=float, default=0.1)
    a.add_argument("--max-cycles", type=int, default=MAX_CYCLES)
    a.add_argument("--format", choices=["json", "csv"], default="json")
    a.add_argument("--no-timing", dest="timing", action="store_false",
                   help="write zeros instead of wall-clock times")

    s = add("paths", cmd_paths, "enumerate candidate paths with heuristic pruning")
    s.add_argument("--catalog", required=True)
    s.add_argument("--base", default="ETH")
    s.add_argument("--max-len", type=int, default=5)
    s.add_argument("--cap", type=int, default=EXPANSION_CAP, help="prefix expansion budget")
    s.add_argument("--stats", action="store_true", help="print per-length before/after counts")

    q = add("search", cmd_search, "optimise revenue of candidate paths on one snapshot")
    q.add_argument("--snapshot", required=True)
    q.add_argument("--catalog", required=True)
    q.add_argument("--paths", help="file with one space-separated action-id path per line")
    q.add_argument("--base", default="ETH")
    q.add_argument("--max-len", type=int, default=4, help="when --paths is not given")
    q.add_argument("--min-target", type=float, default=MIN_TARGET)
    q.add_argument("--free-params", action="store_true")
    q.add_argument("--export-smt", metavar="DIR")

    r = add("replay", cmd_replay, "replay a block series with state-change skipping")
    r.add_argument("--series", required=True, help="directory of snapshot JSON files")
    r.add_argument("--catalog", required=True)
    r.add_argument("--mode", choices=["arb", "search"], default="search")
    r.add_argument("--paths")
    r.add_argument("--base", default="ETH")
    r.add_argument("--max-len", type=int, default=4)
    r.add_argument("--min-revenue", type=float, default=MIN_TARGET)
    r.add_argument("--gas-gwei", type=float, default=32.0)
    r.add_argument("--gas-per-action", type=int, default=150_000)
    r.add_argument("--flash-fee", type=float, default=0.0)
    r.add_argument("--free-params", action="store_true")
    r.add_argument("--no-timing", dest="timing", action="store_false")

    m = add("mdp", cmd_mdp, "MEV threshold at which forking beats honest mining")
    m.add_argument("--alpha", type=float, default=0.10)
    m.add_argument("--stale", type=float, default=0.0572)
    m.add_argument("--k", type=int, default=1)
    m.add_argument("--gamma", type=float, default=0.0)
    m.add_argument("--omega", type=float, default=0.0)
    m.add_argument("--cm", type=float, default=None, help="mining cost (default: alpha)")
    m.add_argument("--cutoff", type=int, default=20)
    m.add_argument("--margin", type=float, default=0.1)
    m.add_argument("--sweep", help="e.g. alpha=0.05:0.45:0.05")

    g = add("gen-snapshot", cmd_gen_snapshot, "write a bundled synthetic scenario")
    g.add_argument("--preset", required=True, choices=sorted(presets.STATES))
    g.add_argument("--catalog-out", help="also write the preset's catalog here")
    g.add_argument("--blocks", type=int, default=1, help="> 1 writes a block series into --out")
    g.add_argument("--touched", type=int, default=30)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DefiError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
