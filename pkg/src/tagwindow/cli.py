"""Command-line entry point: ``tagwindow simulate | analyze | report``.

Exit codes: 0 success, 1 data error, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .alphaw import AlphaWConfig, PeriodSpec, alpha_w_analysis, summarize, write_alpha_w_summary, write_alpha_w_tsv
from .generator import ConfigError, GeneratorConfig, generate_stream, parse_alpha_schedule, parse_window_sampler, write_truth
from .ingest import FormatError, IngestConfig, parse_stream, read_tag_list, write_stream
from .model import TagWindowError
from .motivation import (build_profiles, dominant_motivation, m_histogram, score_users, write_histogram,
                         write_scores)
from .stats import (InsufficientPoints, heaps_curve, log_binned, loglog_slope, rank_frequency, w_distribution,
                    write_heaps, write_log_binned, write_rank_frequency, write_w_distribution)

log = logging.getLogger("tagwindow")

MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        json.dump(obj, fp, sort_keys=True, indent=2, allow_nan=False)
        fp.write("\n")


def write_manifest(out_dir: Path, command: str, config: dict, outputs: list[str],
                   inputs: dict | None = None, seed=None, data_range=None) -> None:
    """Record tool version, resolved config, digests of inputs and outputs.

    Timestamps are those of the data (first and last entry), never wall
    clock, so reruns produce identical manifests.
    """
    manifest = {
        "tool": "tagwindow",
        "version": __version__,
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": inputs or {},
        "outputs": {name: sha256_file(out_dir / name) for name in sorted(outputs)},
        "timestamps": data_range or {},
    }
    _dump_json(manifest, out_dir / MANIFEST)


# -- argument handling -------------------------------------------------------


def _read_config_file(path: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment. Keys use option names (dashes or underscores)."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"config: cannot read {path}: {exc.strerror}") from None
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"config line {n}: expected key=value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = _read_config_file(known.config)
    actions = {a.dest: a for a in parser._actions}
    defaults = {}
    for key, value in values.items():
        action = actions.get(key)
        if action is None or key in ("help", "config", "command"):
            raise UsageError(f"config: unknown setting {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"config: {key} must be true or false")
            defaults[key] = value.lower() in ("true", "1", "yes")
        elif action.type is not None:
            try:
                defaults[key] = action.type(value)
            except (TypeError, ValueError):
                raise UsageError(f"config: invalid value for {key}: {value!r}") from None
        else:
            defaults[key] = value
    parser.set_defaults(**defaults)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tagwindow",
        description="Simulate and analyse windowed tag streams (Yule-Simon process, alpha-w correlation, "
                    "describer/categorizer indices).",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    sim = sub.add_parser("simulate", help="generate a synthetic entry log", formatter_class=fmt)
    sim.add_argument("--config", help="key=value file supplying defaults for any option below")
    sim.add_argument("--alpha", default="0.1",
                     help="innovation-rate schedule: a number, constant:A, decay:A:B "
                          "(A*(N+1)^-B) or coupled:W=A,W=A,... (alpha as a function of window size)")
    sim.add_argument("--window", default="constant:1",
                     help="window-size sampler: constant:W, uniform:LO:HI, powerlaw:GAMMA:WMAX or pmf:W=P,...")
    sim.add_argument("--entries", type=int, default=1000, help="number of entries to generate")
    sim.add_argument("--seed", type=int, default=0, help="64-bit RNG seed")
    sim.add_argument("--users", type=int, default=1, help="number of synthetic users, drawn uniformly per entry")
    sim.add_argument("--per-entry-update", action="store_true",
                     help="let tags drawn inside a window see counts only as of the entry start")
    sim.add_argument("--format", choices=("jsonl", "csv"), default="jsonl", help="entry-log format")
    sim.add_argument("-o", "--output", default=".", help="output directory")

    ana = sub.add_parser("analyze", help="compute all statistics for an entry log", formatter_class=fmt)
    ana.add_argument("input", help="entry log (.jsonl or .csv, optionally gzip-compressed)")
    ana.add_argument("--config", help="key=value file supplying defaults for any option below")
    ana.add_argument("-o", "--output", default="report", help="report directory")
    ana.add_argument("--format", choices=("auto", "jsonl", "csv"), default="auto", help="input format")
    ana.add_argument("--period-days", type=float, default=91.0,
                     help="length of the analysis periods in days (91 = three months)")
    ana.add_argument("--min-bin-entries", type=int, default=100,
                     help="alpha-w bins with no more than this many entries are ignored")
    ana.add_argument("--n-bins", type=int, default=20, help="log-scale window-size bins per period")
    ana.add_argument("--w-cap", type=int, default=None,
                     help="drop entries with larger windows from the alpha-w analysis only (e.g. 30 for Instagram)")
    ana.add_argument("--exclude-tags-file", default=None,
                     help="file of tags removed from every window, one per line (e.g. a service's fixed tags)")
    ana.add_argument("--min-entries-per-user", type=int, default=200,
                     help="users need strictly more entries than this to receive an M score")
    ana.add_argument("--rho-threshold", type=float, default=0.2,
                     help="|Spearman rho| needed to call an alpha-w correlation positive or negative")
    ana.add_argument("--min-bins", type=int, default=5, help="retained bins needed before classifying")
    ana.add_argument("--significance", type=float, default=0.05,
                     help="p-value a correlation must reach to be classified; 1 disables the test")
    ana.add_argument("--binary-alpha", action="store_true",
                     help="per-entry alpha is 1 if the entry has any new tag (default: new-tag fraction)")
    ana.add_argument("--burn-in", action="store_true", help="leave the first period out of the overall tally")
    ana.add_argument("--h-opt", choices=("balanced", "integer"), default="balanced",
                     help="ideal-categorizer entropy: log2(|R|/|T|) or the whole-resource even split")
    ana.add_argument("--weighting", choices=("annotations", "uniform"), default="annotations",
                     help="tag weights p(t) in H(R|T)")
    ana.add_argument("--within", choices=("uniform", "frequency"), default="uniform",
                     help="H(R|t): log2 |R(t)| or the entropy of annotation counts")
    ana.add_argument("--threads", type=int, default=1,
                     help="worker cap; the analysis is vectorised and runs in one worker")

    rep = sub.add_parser("report", help="print a summary of an analyze output directory", formatter_class=fmt)
    rep.add_argument("directory")
    return parser


# -- subcommands -------------------------------------------------------------


def cmd_simulate(args) -> int:
    config = GeneratorConfig(
        seed=args.seed,
        num_entries=args.entries,
        alpha_schedule=parse_alpha_schedule(args.alpha),
        window_sampler=parse_window_sampler(args.window),
        num_users=args.users,
        per_entry_update=args.per_entry_update,
    ).validate()
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    log.info("simulating %d entries", config.num_entries)
    sim = generate_stream(config)
    log_name = f"entries.{args.format}"
    with open(out / log_name, "w", encoding="utf-8", newline="\n") as fp:
        write_stream(sim.stream, fp, args.format)
    with open(out / "true_alpha.txt", "w", encoding="utf-8", newline="\n") as fp:
        write_truth(sim.true_alpha, fp)
    entries = sim.stream.entries
    data_range = {"first_entry": entries[0].timestamp, "last_entry": entries[-1].timestamp} if entries else {}
    write_manifest(out, "simulate", {**config.as_dict(), "format": args.format},
                   [log_name, "true_alpha.txt"], seed=config.seed, data_range=data_range)
    return 0


def _analyze_config(args) -> dict:
    keys = ("format", "period_days", "min_bin_entries", "n_bins", "w_cap", "exclude_tags_file",
            "min_entries_per_user", "rho_threshold", "min_bins", "significance", "binary_alpha", "burn_in",
            "h_opt", "weighting", "within", "threads")
    return {k: getattr(args, k) for k in keys}


def cmd_analyze(args) -> int:
    for name in ("min_bin_entries", "min_entries_per_user", "min_bins", "threads"):
        if getattr(args, name) < 0:
            raise UsageError(f"{name.replace('_', '-')}: must be >= 0")
    if args.period_days <= 0:
        raise UsageError("period-days: must be positive")
    if args.n_bins < 1:
        raise UsageError("n-bins: must be >= 1")
    if args.w_cap is not None and args.w_cap < 1:
        raise UsageError("w-cap: must be >= 1")
    excluded: tuple[str, ...] = ()
    inputs = {}
    if args.exclude_tags_file:
        try:
            excluded = tuple(read_tag_list(args.exclude_tags_file))
        except OSError as exc:
            raise UsageError(f"exclude-tags-file: {exc.strerror}") from None
        inputs[os.path.basename(args.exclude_tags_file)] = sha256_file(args.exclude_tags_file)
    if not os.path.isfile(args.input):
        raise UsageError(f"input: no such file {args.input}")
    inputs[os.path.basename(args.input)] = sha256_file(args.input)

    ingest_cfg = IngestConfig(fmt=args.format, excluded_tags=excluded, w_cap=args.w_cap)
    log.info("reading %s", args.input)
    parsed = parse_stream(args.input, ingest_cfg)
    stream, istats = parsed.stream, parsed.stats
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    def tsv(name, writer, *obj):
        with open(out / name, "w", encoding="utf-8", newline="\n") as fp:
            writer(*obj, fp)
        written.append(name)

    def js(name, obj):
        _dump_json(obj, out / name)
        written.append(name)

    js("ingest_stats.json", istats.as_dict())

    log.info("window-size distribution, Zipf and Heaps curves")
    wdist = w_distribution(stream)
    tsv("w_distribution.tsv", write_w_distribution, wdist)
    tsv("w_distribution_log2.tsv", write_log_binned, *log_binned(wdist, 2.0))
    ranks = rank_frequency(stream.tags)
    tsv("rank_frequency.tsv", write_rank_frequency, ranks)
    heaps = heaps_curve(stream)
    tsv("heaps.tsv", write_heaps, heaps)

    def fit(points, x_range=None):
        try:
            f = loglog_slope(points, x_range)
        except InsufficientPoints:
            return None
        return {"slope": f.slope, "intercept": f.intercept, "r2": f.r2, "points": f.n_points}

    log.info("alpha-w analysis")
    aw_cfg = AlphaWConfig(min_bin_entries=args.min_bin_entries, w_cap=args.w_cap, n_bins=args.n_bins,
                          rho_threshold=args.rho_threshold, min_bins=args.min_bins,
                          significance=args.significance, binary=args.binary_alpha)
    period = PeriodSpec(args.period_days)
    reports = alpha_w_analysis(stream, period, aw_cfg)
    tsv("alpha_w.tsv", write_alpha_w_tsv, reports)
    aw_summary = summarize(reports, aw_cfg, period, burn_in=args.burn_in)
    tsv("alpha_w_summary.json", write_alpha_w_summary, aw_summary)

    log.info("motivation scores")
    options = {"weighting": args.weighting, "within": args.within, "h_opt_method": args.h_opt}
    profiles = build_profiles(stream, min_entries=args.min_entries_per_user + 1)
    scores, excluded_users = score_users(profiles, args.min_entries_per_user, **options)
    tsv("motivation.tsv", write_scores, scores, stream.users)
    mhist = m_histogram(scores) if scores else None
    tsv("motivation_histogram.tsv", write_histogram, mhist)

    js("summary.json", {
        "table": istats.table_row(),
        "w": {"median": wdist.median, "mean": wdist.mean},
        "zipf_fit": fit(ranks, (1, 1000)),
        "heaps_fit": fit(heaps.points()),
        "alpha_w": {"overall": aw_summary["overall"], "tally": aw_summary["tally"]},
        "motivation": {
            "effective_users": len(scores),
            "excluded_few_entries": len(stream.users) - len(profiles),
            "excluded_zero_h_opt": excluded_users["zero_h_opt"],
            "mean_m": mhist.mean if mhist else None,
            "dominant": dominant_motivation(mhist.mean) if mhist else None,
            **options,
        },
    })
    entries = stream.entries
    write_manifest(out, "analyze", _analyze_config(args), written, inputs=inputs,
                   data_range={"first_entry": entries[0].timestamp, "last_entry": entries[-1].timestamp})
    return 0


def _load_json(path: Path):
    try:
        with open(path, encoding="utf-8") as fp:
            return json.load(fp)
    except (OSError, json.JSONDecodeError) as exc:
        raise TagWindowError(f"cannot read {path}: {exc}") from None


def cmd_report(args) -> int:
    d = Path(args.directory)
    summary = _load_json(d / "summary.json")
    aw = _load_json(d / "alpha_w_summary.json")
    try:
        table, w, mot = summary["table"], summary["w"], summary["motivation"]
        lines = [
            "users={users} vocabulary={vocabulary} annotations={annotations} entries={entries}".format(**table),
            f"w: median={w['median']:g} mean={w['mean']:.2f}",
        ]
        for p in aw["periods"]:
            rho = "n/a" if p["spearman_rho"] is None else f"{p['spearman_rho']:.3f}"
            lines.append(f"period {p['period']}: entries={p['entries']} bins={p['retained_bins']} "
                         f"rho={rho} classification={p['classification']}")
        lines.append(f"alpha-w overall: {aw['overall']}")
        if not mot["effective_users"]:
            lines.append("no effective users")
        else:
            lines.append(f"M: mean={mot['mean_m']:.3f} effective_users={mot['effective_users']} "
                         f"{dominant_motivation(mot['mean_m'])}")
    except (KeyError, TypeError, ValueError) as exc:
        raise TagWindowError(f"corrupt report in {d}: {exc}") from None
    print("\n".join(lines))
    return 0


COMMANDS = {"simulate": cmd_simulate, "analyze": cmd_analyze, "report": cmd_report}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        if argv and argv[0] in COMMANDS:
            _apply_config(parser._subparsers._group_actions[0].choices[argv[0]], argv[1:])
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"tagwindow: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"tagwindow: error: {exc}", file=sys.stderr)
        return 2
    except (TagWindowError, FormatError) as exc:
        print(f"tagwindow: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
