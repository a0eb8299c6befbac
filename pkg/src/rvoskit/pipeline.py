"""Per-pair orchestration (gate, sample, segment) and whole-dataset runs.

For each (video, expression) pair the output is exactly one of two things:
all-zero masks when the enabled checker answers "no", or the segmentation
result otherwise. Backend failures follow the configured policy: fail-open
records the pair and keeps going, strict aborts the run.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .dataset import MASK_SUFFIX, DatasetIndex, ReferringExpression, VideoSequence
from .errors import BackendError, ConfigError, CorruptMaskError, ProtocolError, ShapeError
from .masks import MaskSequence, save_mask_png, zero_mask_sequence
from .metrics import EvalReport, evaluate_dataset
from .sampler import SamplerConfig, Strategy, sample
from .segmenter import (
    ConstantEmptySegmenterBackend,
    OracleSegmenterBackend,
    SegmenterBackend,
    WorkerSegmenterBackend,
    run_segmentation,
)
from .vlc import CheckerBackend, MockCheckerBackend, VideoLanguageChecker, WorkerCheckerBackend
from .worker import DEFAULT_TIMEOUT, WorkerPool

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_GATED = "gated_zero"
STATUS_BACKEND_ERROR = "backend_error"

MANIFEST_FILENAME = "run_manifest.json"

_PAIR_ERRORS = (BackendError, ProtocolError, ShapeError, CorruptMaskError)


@dataclass(frozen=True)
class PipelineConfig:
    sampler: SamplerConfig = SamplerConfig()
    vlc_enabled: bool = False
    vlc_backend: str | None = None
    segmenter_backend: str = "constant-empty"
    pool_size: int = 1
    out_root: Path | None = None
    vlc_strict: bool = False
    strict: bool = False
    worker_timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self):
        if self.vlc_enabled and not self.vlc_backend:
            raise ConfigError("vlc is enabled but no vlc backend is configured")
        if self.pool_size < 1:
            raise ConfigError(f"pool size must be >= 1, got {self.pool_size}")

    def snapshot(self) -> dict:
        return {
            "kfs_strategy": self.sampler.strategy.value,
            "kfs_number": self.sampler.budget,
            "kfs_head_fraction": self.sampler.head_fraction,
            "vlc_enabled": self.vlc_enabled,
            "vlc_backend": self.vlc_backend,
            "segmenter_backend": self.segmenter_backend,
            "pool_size": self.pool_size,
            "out_root": str(self.out_root) if self.out_root else None,
            "vlc_strict": self.vlc_strict,
            "strict": self.strict,
        }


class PipelineBackends:
    """Constructed checker + segmenter pair and the pools behind them."""

    def __init__(self, checker: VideoLanguageChecker | None,
                 segmenter: SegmenterBackend, pools: list[WorkerPool]):
        self.checker = checker
        self.segmenter = segmenter
        self._pools = pools

    def identities(self) -> dict:
        return {
            "vlc": self.checker.backend.backend_id if self.checker else None,
            "segmenter": self.segmenter.name,
        }

    def close(self) -> None:
        for pool in self._pools:
            pool.close()

    def __enter__(self) -> "PipelineBackends":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def make_segmenter_backend(spec: str, dataset: DatasetIndex, pool_size: int,
                           timeout: float) -> tuple[SegmenterBackend, list[WorkerPool]]:
    spec = spec.strip()
    if spec == "oracle":
        return OracleSegmenterBackend(dataset), []
    if spec.startswith("oracle:"):
        return OracleSegmenterBackend(dataset, Path(spec.split(":", 1)[1])), []
    if spec in ("constant-empty", "empty"):
        return ConstantEmptySegmenterBackend(), []
    pool = WorkerPool(spec, size=pool_size, timeout=timeout)
    return WorkerSegmenterBackend(pool), [pool]


def make_checker_backend(spec: str, pool_size: int,
                         timeout: float) -> tuple[CheckerBackend, list[WorkerPool]]:
    spec = spec.strip()
    if spec == "mock":
        return MockCheckerBackend(), []
    pool = WorkerPool(spec, size=pool_size, timeout=timeout)
    return WorkerCheckerBackend(pool), [pool]


def build_backends(cfg: PipelineConfig, dataset: DatasetIndex) -> PipelineBackends:
    pools: list[WorkerPool] = []
    checker = None
    try:
        if cfg.vlc_enabled:
            assert cfg.vlc_backend is not None
            backend, checker_pools = make_checker_backend(
                cfg.vlc_backend, cfg.pool_size, cfg.worker_timeout)
            pools.extend(checker_pools)
            checker = VideoLanguageChecker(backend, cfg.sampler)
        segmenter, seg_pools = make_segmenter_backend(
            cfg.segmenter_backend, dataset, cfg.pool_size, cfg.worker_timeout)
        pools.extend(seg_pools)
    except Exception:
        for pool in pools:
            pool.close()
        raise
    return PipelineBackends(checker, segmenter, pools)


@dataclass(frozen=True)
class PairOutcome:
    masks: MaskSequence
    status: str
    detail: str = ""


@dataclass(frozen=True)
class PairRecord:
    video_id: str
    expression_id: str
    status: str
    seconds: float
    detail: str = ""


@dataclass(frozen=True)
class RunManifest:
    config: dict
    backends: dict
    pairs: tuple[PairRecord, ...]

    def counts(self) -> dict[str, int]:
        out = {STATUS_OK: 0, STATUS_GATED: 0, STATUS_BACKEND_ERROR: 0}
        for pair in self.pairs:
            out[pair.status] = out.get(pair.status, 0) + 1
        return out

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "backends": self.backends,
            "counts": self.counts(),
            "pairs": [
                {
                    "video_id": p.video_id,
                    "expression_id": p.expression_id,
                    "status": p.status,
                    "seconds": round(p.seconds, 6),
                    "detail": p.detail,
                }
                for p in self.pairs
            ],
        }

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def execute_pair(video: VideoSequence, expression: ReferringExpression,
                 cfg: PipelineConfig, backends: PipelineBackends) -> PairOutcome:
    """Run the gate and segmentation for one pair under the failure policy."""
    status = STATUS_OK
    detail = ""
    gated = False
    if cfg.vlc_enabled:
        assert backends.checker is not None
        try:
            verdict = backends.checker.check(video, expression)
            gated = not verdict.matches
        except _PAIR_ERRORS as exc:
            if cfg.strict or cfg.vlc_strict:
                raise
            # Fail open: treat the unanswered check as "yes" and keep going.
            status = STATUS_BACKEND_ERROR
            detail = f"vlc: {exc}"
            logger.warning("vlc backend failed for %s/%s: %s",
                           video.video_id, expression.expression_id, exc)
    if gated:
        return PairOutcome(zero_mask_sequence(video, expression.expression_id), STATUS_GATED)
    try:
        keyframes = sample(cfg.sampler, video.frame_count)
        masks = run_segmentation(backends.segmenter, video, expression, keyframes)
    except _PAIR_ERRORS as exc:
        if cfg.strict:
            raise
        status = STATUS_BACKEND_ERROR
        detail = (detail + "; " if detail else "") + f"segmenter: {exc}"
        logger.warning("segmenter backend failed for %s/%s: %s",
                       video.video_id, expression.expression_id, exc)
        masks = zero_mask_sequence(video, expression.expression_id)
    return PairOutcome(masks, status, detail)


def run_expression(video: VideoSequence, expression: ReferringExpression,
                   cfg: PipelineConfig, backends: PipelineBackends) -> MaskSequence:
    """Masks for one pair: all-zero when gated, segmentation output otherwise."""
    return execute_pair(video, expression, cfg, backends).masks


def _write_masks(out_root: Path, video: VideoSequence, expression_id: str,
                 masks: MaskSequence) -> None:
    mask_dir = out_root / "Annotations" / video.video_id / expression_id
    mask_dir.mkdir(parents=True, exist_ok=True)
    for frame_id, mask in zip(video.frame_ids, masks):
        save_mask_png(mask, mask_dir / f"{frame_id}{MASK_SUFFIX}")


def run_dataset(dataset: DatasetIndex, cfg: PipelineConfig) -> RunManifest:
    """Predict every pair, write the prediction tree and the run manifest.

    Results are independent of scheduling: pairs only write to their own
    paths and the manifest is assembled in dataset order at the end.
    """
    if cfg.out_root is None:
        raise ConfigError("run_dataset needs an output root")
    out_root = Path(cfg.out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    pairs = dataset.pairs()

    with build_backends(cfg, dataset) as backends:

        def job(pair) -> PairRecord:
            video, expression = pair
            start = time.perf_counter()
            outcome = execute_pair(video, expression, cfg, backends)
            _write_masks(out_root, video, expression.expression_id, outcome.masks)
            return PairRecord(
                video_id=video.video_id,
                expression_id=expression.expression_id,
                status=outcome.status,
                seconds=time.perf_counter() - start,
                detail=outcome.detail,
            )

        if cfg.pool_size > 1:
            with ThreadPoolExecutor(max_workers=cfg.pool_size) as executor:
                records = list(executor.map(job, pairs))
        else:
            records = [job(pair) for pair in pairs]

        manifest = RunManifest(
            config=cfg.snapshot(),
            backends=backends.identities(),
            pairs=tuple(records),
        )
    manifest.write(out_root / MANIFEST_FILENAME)
    return manifest


@dataclass(frozen=True)
class GridCell:
    vlc: bool
    strategy: Strategy
    number: int

    def slug(self) -> str:
        return f"{'vlc' if self.vlc else 'novlc'}_{self.strategy.value}_{self.number:03d}"


def parse_grid_spec(spec: dict) -> list[GridCell]:
    """Grid cells from a declarative spec: explicit ``rows`` or an ``axes``
    cross-product (vlc, then strategy, then number order)."""
    cells: list[GridCell] = []
    if "rows" in spec:
        for row in spec["rows"]:
            cells.append(GridCell(bool(row["vlc"]), Strategy.parse(row["strategy"]),
                                  int(row["number"])))
    elif "axes" in spec:
        axes = spec["axes"]
        for vlc in axes.get("vlc", [False]):
            for strategy in axes.get("strategy", [Strategy.HYBRID.value]):
                for number in axes.get("number", [SamplerConfig().budget]):
                    cells.append(GridCell(bool(vlc), Strategy.parse(strategy), int(number)))
    else:
        raise ConfigError("grid spec needs a 'rows' list or an 'axes' object")
    if not cells:
        raise ConfigError("grid spec produced no cells")
    return cells


def ablation_grid(dataset: DatasetIndex, cells: list[GridCell], cfg: PipelineConfig,
                  gt_root: Path | None = None,
                  eval_workers: int | None = None) -> list[tuple[GridCell, EvalReport]]:
    """Run and evaluate every grid cell; rows come back in grid order."""
    if cfg.out_root is None:
        raise ConfigError("ablation_grid needs an output root")
    gt_root = Path(gt_root) if gt_root is not None else dataset.root
    results = []
    for cell in cells:
        cell_cfg = PipelineConfig(
            sampler=SamplerConfig(strategy=cell.strategy, budget=cell.number,
                                  head_fraction=cfg.sampler.head_fraction),
            vlc_enabled=cell.vlc,
            vlc_backend=cfg.vlc_backend,
            segmenter_backend=cfg.segmenter_backend,
            pool_size=cfg.pool_size,
            out_root=Path(cfg.out_root) / cell.slug(),
            vlc_strict=cfg.vlc_strict,
            strict=cfg.strict,
            worker_timeout=cfg.worker_timeout,
        )
        logger.info("ablation cell %s", cell.slug())
        run_dataset(dataset, cell_cfg)
        report = evaluate_dataset(cell_cfg.out_root, gt_root, dataset, workers=eval_workers)
        results.append((cell, report))
    return results
