"""Command-line interface: run / eval / ablate / sample / check / synth."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .dataset import load_dataset
from .errors import BackendError, ConfigError, MissingPredictionError, ProtocolError, RvosError
from .metrics import evaluate_dataset
from .pipeline import (
    STATUS_BACKEND_ERROR,
    PipelineConfig,
    ablation_grid,
    build_backends,
    parse_grid_spec,
    run_dataset,
)
from .reporting import ablation_csv, render_ablation, render_report
from .sampler import DEFAULT_BUDGET, DEFAULT_HEAD_FRACTION, SamplerConfig, Strategy, sample
from .synth import SynthSpec, generate_dataset
from .worker import DEFAULT_TIMEOUT

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_USAGE = 2
EXIT_BACKEND_FATAL = 3

_STRATEGY_CHOICES = [s.value for s in Strategy]


def _load_config_file(path: Path) -> dict:
    try:
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # stdlib tomllib arrived in 3.11
                import tomli as tomllib

            with open(path, "rb") as fh:
                return tomllib.load(fh)
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="config file (.json or .toml) supplying flag defaults; "
                             "explicit flags override it")
    common.add_argument("--dump-config", type=Path, default=None, metavar="PATH",
                        help="write the effective configuration as JSON and continue")
    common.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="logging verbosity")
    common.add_argument("--seed", type=int, default=0,
                        help="seed for commands with randomness (synth)")
    return common


def _add_kfs_flags(parser: argparse.ArgumentParser, default_strategy: str) -> None:
    parser.add_argument("--kfs-strategy", choices=_STRATEGY_CHOICES, default=default_strategy,
                        help="key-frame sampling strategy")
    parser.add_argument("--kfs-number", type=int, default=DEFAULT_BUDGET, metavar="N",
                        help="key-frame budget")
    parser.add_argument("--kfs-head-fraction", type=float, default=DEFAULT_HEAD_FRACTION,
                        metavar="P", help="fraction of the hybrid budget spent on the head prefix")


def build_parser(config_defaults: dict | None = None) -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="rvoskit",
        description="Referring video object segmentation pipeline and J&F evaluation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p_sample = sub.add_parser("sample", parents=[common],
                              help="print the sampled key-frame indices for a video length")
    p_sample.add_argument("--frames", type=int, required=True, metavar="T",
                          help="number of frames in the video")
    _add_kfs_flags(p_sample, Strategy.UNIFORM.value)

    p_synth = sub.add_parser("synth", parents=[common],
                             help="generate a synthetic dataset tree with exact ground truth")
    p_synth.add_argument("--out", type=Path, required=True, help="output dataset root")
    p_synth.add_argument("--videos", type=int, default=5)
    p_synth.add_argument("--expressions-per-video", type=int, default=2)
    p_synth.add_argument("--absent-per-video", type=int, default=1,
                         help="marker expressions per video that the mock checker rejects")
    p_synth.add_argument("--frames", type=int, default=8, help="base frames per video")
    p_synth.add_argument("--height", type=int, default=64)
    p_synth.add_argument("--width", type=int, default=96)
    p_synth.add_argument("--fixed-length", action="store_true",
                         help="give every video exactly --frames frames")

    p_run = sub.add_parser("run", parents=[common],
                           help="run the pipeline over a dataset split and write predictions")
    p_run.add_argument("--dataset", type=Path, required=True, help="dataset root")
    p_run.add_argument("--split", default="valid")
    p_run.add_argument("--out", type=Path, required=True, help="output root for predictions")
    _add_kfs_flags(p_run, Strategy.HYBRID.value)
    p_run.add_argument("--vlc", default=None, metavar="SPEC",
                       help="checker backend: 'mock' or a worker command line; omit to disable")
    p_run.add_argument("--vlc-strict", action="store_true",
                       help="abort the run when the checker backend fails")
    p_run.add_argument("--strict", action="store_true",
                       help="abort the run on any backend failure")
    p_run.add_argument("--segmenter", default="constant-empty", metavar="SPEC",
                       help="segmenter backend: 'oracle', 'oracle:<root>', 'constant-empty', "
                            "or a worker command line")
    p_run.add_argument("--pool", type=int, default=1, metavar="K",
                       help="concurrent pairs / worker processes per backend")
    p_run.add_argument("--worker-timeout", type=float, default=DEFAULT_TIMEOUT, metavar="S")

    p_eval = sub.add_parser("eval", parents=[common],
                            help="score a prediction tree against ground truth")
    p_eval.add_argument("--pred", type=Path, required=True,
                        help="root containing Annotations/ with predictions")
    p_eval.add_argument("--gt", type=Path, default=None,
                        help="root containing Annotations/ with ground truth "
                             "(defaults to the dataset root)")
    p_eval.add_argument("--dataset", type=Path, required=True, help="dataset root")
    p_eval.add_argument("--split", default="valid")
    p_eval.add_argument("--out", type=Path, default=None, help="write the report JSON here")
    p_eval.add_argument("--csv", type=Path, default=None, help="write per-expression CSV here")
    p_eval.add_argument("--bound-th", type=int, default=None, metavar="R",
                        help="boundary matching radius override in pixels")
    p_eval.add_argument("--pool", type=int, default=None, metavar="K",
                        help="evaluation worker processes (default: cpu count)")
    p_eval.add_argument("--score-missing-zero", action="store_true",
                        help="score expressions with missing predictions as 0 instead of failing")

    p_check = sub.add_parser("check", parents=[common],
                             help="run the video-language check for one pair")
    p_check.add_argument("--dataset", type=Path, required=True)
    p_check.add_argument("--split", default="valid")
    p_check.add_argument("--video", required=True, metavar="VIDEO_ID")
    p_check.add_argument("--expression", required=True, metavar="EXPR_ID")
    p_check.add_argument("--vlc", required=True, metavar="SPEC",
                         help="checker backend: 'mock' or a worker command line")
    _add_kfs_flags(p_check, Strategy.HYBRID.value)
    p_check.add_argument("--worker-timeout", type=float, default=DEFAULT_TIMEOUT, metavar="S")

    p_ablate = sub.add_parser("ablate", parents=[common],
                              help="run a VLC/KFS/budget grid and render the results table")
    p_ablate.add_argument("--dataset", type=Path, required=True)
    p_ablate.add_argument("--split", default="valid")
    p_ablate.add_argument("--grid", type=Path, required=True,
                          help="grid spec file (.json or .toml) with 'rows' or 'axes'")
    p_ablate.add_argument("--out", type=Path, required=True,
                          help="output root; each cell writes under a subdirectory")
    p_ablate.add_argument("--gt", type=Path, default=None,
                          help="ground-truth root (defaults to the dataset root)")
    p_ablate.add_argument("--vlc", default=None, metavar="SPEC")
    p_ablate.add_argument("--segmenter", default="oracle", metavar="SPEC")
    p_ablate.add_argument("--pool", type=int, default=1, metavar="K")
    p_ablate.add_argument("--csv", type=Path, default=None, help="write the table as CSV here")
    p_ablate.add_argument("--worker-timeout", type=float, default=DEFAULT_TIMEOUT, metavar="S")

    if config_defaults:
        subparsers = (p_sample, p_synth, p_run, p_eval, p_check, p_ablate)
        known = set()
        for sp in subparsers:
            known.update(a.dest for a in sp._actions)
        unknown = set(config_defaults) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for sp in subparsers:
            dests = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in config_defaults.items() if k in dests})
            # A value from the config file satisfies a required flag.
            for action in sp._actions:
                if action.required and action.dest in config_defaults:
                    action.required = False
    return parser


def _scan_config_path(argv: list[str]) -> Path | None:
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            return Path(argv[i + 1])
        if arg.startswith("--config="):
            return Path(arg.split("=", 1)[1])
    return None


def _dump_config(args: argparse.Namespace) -> None:
    if not args.dump_config:
        return
    skip = {"config", "dump_config"}
    payload = {}
    for key, value in sorted(vars(args).items()):
        if key in skip or key == "command":
            continue
        payload[key] = str(value) if isinstance(value, Path) else value
    payload["command"] = args.command
    with open(args.dump_config, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sampler_config(args: argparse.Namespace) -> SamplerConfig:
    return SamplerConfig(strategy=args.kfs_strategy, budget=args.kfs_number,
                         head_fraction=args.kfs_head_fraction)


def cmd_sample(args: argparse.Namespace) -> int:
    keyframes = sample(_sampler_config(args), args.frames)
    print(json.dumps(list(keyframes.indices), separators=(",", ":")))
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SynthSpec(
        videos=args.videos,
        expressions_per_video=args.expressions_per_video,
        absent_per_video=args.absent_per_video,
        frames=args.frames,
        height=args.height,
        width=args.width,
        seed=args.seed,
        vary_length=not args.fixed_length,
    )
    root = generate_dataset(args.out, spec)
    print(f"wrote synthetic dataset with {spec.videos} videos to {root}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    cfg = PipelineConfig(
        sampler=_sampler_config(args),
        vlc_enabled=args.vlc is not None,
        vlc_backend=args.vlc,
        segmenter_backend=args.segmenter,
        pool_size=args.pool,
        out_root=args.out,
        vlc_strict=args.vlc_strict,
        strict=args.strict,
        worker_timeout=args.worker_timeout,
    )
    dataset = load_dataset(args.dataset, args.split)
    manifest = run_dataset(dataset, cfg)
    counts = manifest.counts()
    print(f"pairs: {len(manifest.pairs)}  ok: {counts['ok']}  "
          f"gated_zero: {counts['gated_zero']}  backend_error: {counts['backend_error']}")
    return EXIT_FAILURES if counts[STATUS_BACKEND_ERROR] else EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset, args.split)
    gt_root = args.gt if args.gt is not None else dataset.root
    # The missing-prediction scan runs before any scoring, so retrying with
    # zero-scoring enabled costs only directory stats.
    had_missing = False
    try:
        report = evaluate_dataset(args.pred, gt_root, dataset,
                                  tolerance_px=args.bound_th, workers=args.pool)
    except MissingPredictionError:
        if not args.score_missing_zero:
            raise
        had_missing = True
        report = evaluate_dataset(args.pred, gt_root, dataset,
                                  tolerance_px=args.bound_th, workers=args.pool,
                                  score_missing_zero=True)
    print(render_report(report), end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.csv:
        import csv as _csv

        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["video", "expression", "J", "F"])
            for (vid, eid), score in sorted(report.per_expression.items()):
                writer.writerow([vid, eid, f"{score.j:.6f}", f"{score.f:.6f}"])
    return EXIT_FAILURES if had_missing else EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset, args.split)
    expression = next(
        (e for e in dataset.expressions
         if e.video_id == args.video and e.expression_id == args.expression),
        None,
    )
    if expression is None:
        raise ConfigError(f"no expression {args.video}/{args.expression} in the dataset")
    cfg = PipelineConfig(
        sampler=_sampler_config(args),
        vlc_enabled=True,
        vlc_backend=args.vlc,
        segmenter_backend="constant-empty",
        worker_timeout=args.worker_timeout,
    )
    with build_backends(cfg, dataset) as backends:
        assert backends.checker is not None
        verdict = backends.checker.check(dataset.videos[args.video], expression)
    print(json.dumps({
        "video_id": args.video,
        "expression_id": args.expression,
        "matches": verdict.matches,
        "raw_answer": verdict.raw_answer,
        "backend_id": verdict.backend_id,
        "parse_warning": verdict.parse_warning,
    }, sort_keys=True))
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset, args.split)
    cells = parse_grid_spec(_load_config_file(args.grid))
    cfg = PipelineConfig(
        vlc_enabled=False,
        vlc_backend=args.vlc,
        segmenter_backend=args.segmenter,
        pool_size=args.pool,
        out_root=args.out,
        worker_timeout=args.worker_timeout,
    )
    results = ablation_grid(dataset, cells, cfg, gt_root=args.gt)
    rows = [(cell.vlc, cell.strategy.value, cell.number, report) for cell, report in results]
    print(render_ablation(rows), end="")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(ablation_csv(rows))
    for cell, report in results:
        with open(Path(args.out) / cell.slug() / "report.json", "w", encoding="utf-8") as fh:
            json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


_COMMANDS = {
    "sample": cmd_sample,
    "synth": cmd_synth,
    "run": cmd_run,
    "eval": cmd_eval,
    "check": cmd_check,
    "ablate": cmd_ablate,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        config_path = _scan_config_path(argv)
        defaults = _load_config_file(config_path) if config_path else None
        parser = build_parser(defaults)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        _dump_config(args)
        return _COMMANDS[args.command](args)
    except (BackendError, ProtocolError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND_FATAL
    except MissingPredictionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURES
    except RvosError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
