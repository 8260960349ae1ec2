"""Command-line interface.

Subcommands: extract (transcripts -> features), synth (oracle data),
run (full experiment), fuse (multi-judge join), report (re-render a saved
report). Exit codes: 0 success, 1 usage error, 2 data error, 3 internal
error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .core import DataError, InvariantError, RatingScale
from .extract import ExtractConfig, extract_file
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    emit_report,
    fuse,
    generate_synthetic,
    load_samples,
    run_experiment,
    write_samples,
)
from .harness.synth import GENERATORS, SyntheticSpec

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are 1
        raise UsageError(message)


def parse_seeds(text: str) -> tuple[int, ...]:
    """Seed lists like "0-9", "0,3,7", or "5"."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise UsageError(f"no seeds in {text!r}")
    return tuple(seeds)


def parse_methods(text: str) -> tuple[str, ...]:
    from .conformal import METHOD_NAMES

    if text.strip() == "all":
        return METHOD_NAMES
    methods = tuple(m.strip() for m in text.split(",") if m.strip())
    if not methods:
        raise UsageError(f"no methods in {text!r}")
    return methods


def build_parser() -> _Parser:
    parser = _Parser(prog="scorebands", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_ext = sub.add_parser("extract", help="parse judge transcripts into features")
    p_ext.add_argument("--input", "-i", required=True)
    p_ext.add_argument("--out", "-o", required=True)
    p_ext.add_argument("--k-max", type=int, default=5)
    p_ext.add_argument("--floor", type=float, default=ExtractConfig.floor)
    p_ext.add_argument("--nan-fill", type=float, default=ExtractConfig.nan_fill)
    p_ext.add_argument("--window", type=int, default=ExtractConfig.window)
    p_ext.set_defaults(func=cmd_extract)

    p_syn = sub.add_parser("synth", help="generate synthetic oracle samples")
    p_syn.add_argument("--generator", choices=GENERATORS, default="peaked_logprob")
    p_syn.add_argument("--n", type=int, required=True)
    p_syn.add_argument("--seed", type=int, default=0)
    p_syn.add_argument("--out", "-o", required=True)
    p_syn.add_argument("--feature-dim", type=int, default=5)
    p_syn.add_argument("--temperature", type=float, default=1.0)
    p_syn.add_argument("--label-noise", type=float, default=0.2)
    p_syn.add_argument("--logit-noise", type=float, default=0.5)
    p_syn.add_argument("--sigma", type=float, default=0.5)
    p_syn.add_argument("--sigma-ratio", type=float, default=3.0)
    p_syn.add_argument("--oracle-out", default=None)
    p_syn.set_defaults(func=cmd_synth)

    p_run = sub.add_parser("run", help="run a full conformal experiment")
    p_run.add_argument("--config", default=None, help="JSON config file")
    p_run.add_argument("--input", "-i", default=None)
    p_run.add_argument("--out", "-o", default=None)
    p_run.add_argument("--alpha", type=float, default=None)
    p_run.add_argument("--seeds", default=None, help='e.g. "0-9" or "0,1,2"')
    p_run.add_argument("--cal-fraction", type=float, default=None)
    p_run.add_argument("--methods", default=None, help='comma list or "all"')
    p_run.add_argument("--mondrian", default=None, help="partition name or file")
    p_run.add_argument("--adjust", choices=("outward", "inward", "off"), default=None)
    p_run.add_argument("--k-max", type=int, default=None)
    p_run.add_argument("--epochs", type=int, default=None)
    p_run.add_argument("--batch-size", type=int, default=None)
    p_run.add_argument("--learning-rate", type=float, default=None)
    p_run.add_argument("--chr-bins", type=int, default=None)
    p_run.add_argument("--boost-rounds", type=int, default=None)
    p_run.add_argument("--point-predictor", choices=("model", "argmax_feature"),
                       default=None)
    p_run.add_argument("--emit-intervals", action="store_true", default=False,
                       help="write per-sample interval lines (intervals.jsonl)")
    p_run.set_defaults(func=cmd_run)

    p_fuse = sub.add_parser("fuse", help="join features from multiple judges")
    p_fuse.add_argument("--inputs", "-i", nargs="+", required=True)
    p_fuse.add_argument("--out", "-o", required=True)
    p_fuse.add_argument("--order", default=None, help="comma list of judge tags")
    p_fuse.add_argument("--k-max", type=int, default=5)
    p_fuse.set_defaults(func=cmd_fuse)

    p_rep = sub.add_parser("report", help="re-render files from a saved report")
    p_rep.add_argument("--report", "-r", required=True)
    p_rep.add_argument("--out", "-o", required=True)
    p_rep.set_defaults(func=cmd_report)

    return parser


def cmd_extract(args) -> int:
    scale = RatingScale(k_max=args.k_max)
    cfg = ExtractConfig(floor=args.floor, nan_fill=args.nan_fill, window=args.window)
    summary = extract_file(args.input, args.out, scale, cfg)
    print(
        f"extracted {summary.n_ok}/{summary.n_records} transcripts "
        f"({summary.n_failed} failed, {summary.n_mismatch} declared-score "
        f"mismatches, {len(summary.parse_errors)} unparsable lines)"
    )
    for stage in sorted(summary.stage_counts):
        print(f"  stage {stage}: {summary.stage_counts[stage]}")
    for sample_id, reason in summary.failures:
        print(f"  failed {sample_id}: {reason}", file=sys.stderr)
    for line_no, reason in summary.parse_errors:
        print(f"  line {line_no}: {reason}", file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        n=args.n,
        generator=args.generator,
        feature_dim=args.feature_dim,
        seed=args.seed,
        temperature=args.temperature,
        label_noise=args.label_noise,
        logit_noise=args.logit_noise,
        sigma=args.sigma,
        sigma_ratio=args.sigma_ratio,
    )
    samples, oracle = generate_synthetic(spec)
    write_samples(samples, args.out, spec.scale)
    if args.oracle_out:
        with open(args.oracle_out, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "generator": spec.generator,
                    "n": spec.n,
                    "seed": spec.seed,
                    "lower": list(oracle.lower),
                    "upper": list(oracle.upper),
                    "interval_mass": list(oracle.interval_mass),
                },
                fh,
                sort_keys=True,
            )
            fh.write("\n")
    print(f"wrote {len(samples)} samples to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            config = ExperimentConfig.from_dict(json.load(fh))
    else:
        config = ExperimentConfig()
    config = config.with_overrides(
        alpha=args.alpha,
        seeds=parse_seeds(args.seeds) if args.seeds else None,
        cal_fraction=args.cal_fraction,
        methods=parse_methods(args.methods) if args.methods else None,
        mondrian=args.mondrian,
        adjust=args.adjust,
        k_max=args.k_max,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        chr_bins=args.chr_bins,
        boost_rounds=args.boost_rounds,
        point_predictor=args.point_predictor,
        input=args.input,
        out=args.out,
        emit_intervals=True if args.emit_intervals else None,
    )
    if not config.input_path:
        raise UsageError("no input file (use --input or the config file)")
    if not config.out_dir:
        raise UsageError("no output directory (use --out or the config file)")
    samples, line_errors = load_samples(config.input_path, config.scale)
    if line_errors:
        print(f"skipped {len(line_errors)} malformed lines:", file=sys.stderr)
        for line_no, reason in line_errors:
            print(f"  line {line_no}: {reason}", file=sys.stderr)
    report = run_experiment(config, samples)
    paths = emit_report(report, config.out_dir)
    with open(paths["summary"], encoding="utf-8") as fh:
        print(fh.read(), end="")
    print(f"report files in {config.out_dir}")
    return EXIT_OK


def cmd_fuse(args) -> int:
    scale = RatingScale(k_max=args.k_max)
    by_judge: dict[str, list] = {}
    for path in args.inputs:
        samples, errors = load_samples(path, scale)
        if errors:
            print(f"{path}: skipped {len(errors)} malformed lines", file=sys.stderr)
        for s in samples:
            by_judge.setdefault(s.judge_tag, []).append(s)
    order = None
    if args.order:
        order = [j.strip() for j in args.order.split(",") if j.strip()]
    fused, dropped = fuse(by_judge, order)
    write_samples(fused, args.out, scale)
    print(
        f"fused {len(fused)} samples from {len(by_judge)} judges "
        f"({len(dropped)} ids dropped)"
    )
    return EXIT_OK


def cmd_report(args) -> int:
    with open(args.report, encoding="utf-8") as fh:
        report = ExperimentReport.from_dict(json.load(fh))
    paths = emit_report(report, args.out)
    print(f"re-rendered report files in {args.out}")
    for kind in sorted(paths):
        print(f"  {kind}: {paths[kind]}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
