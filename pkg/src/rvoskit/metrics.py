"""Region similarity (J), boundary similarity (F), and dataset evaluation.

J is intersection-over-union of the foreground pixels. F is the F-measure
between mask boundaries where a boundary pixel counts as matched when it lies
within a Chebyshev distance ``r`` of the other mask's boundary; by default
``r = ceil(0.008 * sqrt(H^2 + W^2))``. Degenerate-frame conventions for both
metrics: both masks empty scores 1.0, exactly one empty scores 0.0.

Boundaries use 4-connectivity and treat pixels outside the image as
background, so foreground pixels on the image border are boundary pixels.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Mapping

import cv2
import numpy as np

from .dataset import MASK_SUFFIX, DatasetIndex
from .errors import DatasetFormatError, MissingPredictionError, ShapeError
from .masks import BinaryMask, MaskSequence, read_mask_array

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.uint8)

DEFAULT_TOLERANCE_FACTOR = 0.008


def default_boundary_tolerance(height: int, width: int) -> int:
    """Matching radius in pixels for an image of the given size."""
    return math.ceil(DEFAULT_TOLERANCE_FACTOR * math.hypot(height, width))


def _check_same_shape(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise ShapeError(f"mask dimensions differ: {pred.shape} vs {gt.shape}")


def _bool_grid(grid) -> np.ndarray:
    arr = np.asarray(grid)
    if arr.dtype != np.bool_:
        arr = arr != 0
    return np.ascontiguousarray(arr)


def _fg_u8(grid_bool: np.ndarray) -> np.ndarray:
    # A contiguous bool array is bytewise 0/1 already; the view is free.
    return grid_bool.view(np.uint8)


def _boundary_u8(fg_u8: np.ndarray) -> np.ndarray:
    interior = cv2.erode(fg_u8, _CROSS, borderType=cv2.BORDER_CONSTANT, borderValue=0)
    return fg_u8 - interior


_KERNELS: dict[int, np.ndarray] = {}


def _dilate_chebyshev(grid_u8: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0:
        return grid_u8
    kernel = _KERNELS.get(radius)
    if kernel is None:
        kernel = _KERNELS.setdefault(radius, np.ones((2 * radius + 1, 2 * radius + 1),
                                                     dtype=np.uint8))
    return cv2.dilate(grid_u8, kernel, borderType=cv2.BORDER_CONSTANT, borderValue=0)


def _region_j_bool(pred: np.ndarray, gt: np.ndarray) -> float:
    inter = np.count_nonzero(pred & gt)
    union = np.count_nonzero(pred) + np.count_nonzero(gt) - inter
    if union == 0:
        return 1.0
    return inter / union


def _boundary_f_u8(pred_b: np.ndarray, gt_b: np.ndarray,
                   tolerance_px: int | None) -> float:
    n_pred = np.count_nonzero(pred_b)
    n_gt = np.count_nonzero(gt_b)
    if n_pred == 0 and n_gt == 0:
        return 1.0
    if n_pred == 0 or n_gt == 0:
        return 0.0
    if tolerance_px is None:
        tolerance_px = default_boundary_tolerance(*pred_b.shape)
    gt_dilated = _dilate_chebyshev(gt_b, tolerance_px)
    pred_dilated = _dilate_chebyshev(pred_b, tolerance_px)
    precision = np.count_nonzero(pred_b & gt_dilated) / n_pred
    recall = np.count_nonzero(gt_b & pred_dilated) / n_gt
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def region_j_arrays(pred, gt) -> float:
    """Jaccard index of two bit grids with the empty-mask conventions."""
    pred = _bool_grid(pred)
    gt = _bool_grid(gt)
    _check_same_shape(pred, gt)
    return _region_j_bool(pred, gt)


def boundary_arrays(grid) -> np.ndarray:
    """Boundary of a bit grid: foreground pixels with a 4-neighbor that is
    background or outside the image. Returns a uint8 0/1 grid."""
    return _boundary_u8(_fg_u8(_bool_grid(grid)))


def boundary_f_arrays(pred, gt, tolerance_px: int | None = None) -> float:
    """Boundary F-measure of two bit grids at the given matching radius."""
    pred = _bool_grid(pred)
    gt = _bool_grid(gt)
    _check_same_shape(pred, gt)
    return _boundary_f_u8(_boundary_u8(_fg_u8(pred)), _boundary_u8(_fg_u8(gt)),
                          tolerance_px)


def score_frame_arrays(pred, gt, tolerance_px: int | None = None) -> tuple[float, float]:
    """(J, F) for one frame pair of bit grids, sharing intermediate work."""
    pred = _bool_grid(pred)
    gt = _bool_grid(gt)
    _check_same_shape(pred, gt)
    j = _region_j_bool(pred, gt)
    f = _boundary_f_u8(_boundary_u8(_fg_u8(pred)), _boundary_u8(_fg_u8(gt)),
                       tolerance_px)
    return j, f


def region_j(pred: BinaryMask, gt: BinaryMask) -> float:
    """Region similarity of two masks."""
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise ShapeError(
            f"mask dimensions differ: {pred.height}x{pred.width} vs {gt.height}x{gt.width}"
        )
    return region_j_arrays(pred.to_array(), gt.to_array())


def extract_boundary(mask: BinaryMask) -> np.ndarray:
    """Boundary bit grid of a mask (boolean array)."""
    return boundary_arrays(mask.to_array()).astype(bool)


def boundary_f(pred: BinaryMask, gt: BinaryMask, tolerance_px: int | None = None) -> float:
    """Boundary similarity of two masks."""
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise ShapeError(
            f"mask dimensions differ: {pred.height}x{pred.width} vs {gt.height}x{gt.width}"
        )
    return boundary_f_arrays(pred.to_array(), gt.to_array(), tolerance_px)


@dataclass(frozen=True)
class FrameScore:
    """A (J, F) pair, either for one frame or averaged over a sequence."""

    j: float
    f: float

    def __post_init__(self):
        if not (0.0 <= self.j <= 1.0 and 0.0 <= self.f <= 1.0):
            raise ValueError(f"scores must lie in [0,1], got j={self.j} f={self.f}")

    @property
    def jf(self) -> float:
        return (self.j + self.f) / 2.0


def evaluate_sequence(pred: MaskSequence, gt: MaskSequence,
                      tolerance_px: int | None = None) -> FrameScore:
    """Per-frame J and F averaged over all frames of the sequence pair."""
    if len(pred) != len(gt):
        raise ShapeError(f"sequence lengths differ: {len(pred)} vs {len(gt)}")
    if len(pred) == 0:
        raise ShapeError("cannot evaluate an empty sequence")
    j_total = 0.0
    f_total = 0.0
    for pred_mask, gt_mask in zip(pred, gt):
        j, f = score_frame_arrays(pred_mask.to_array(), gt_mask.to_array(), tolerance_px)
        j_total += j
        f_total += f
    n = len(pred)
    return FrameScore(j_total / n, f_total / n)


def percent(fraction: float) -> float:
    """Fraction in [0,1] as a percentage rounded half-up to 2 decimals."""
    return float(Decimal(repr(fraction * 100.0)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class EvalReport:
    """Per-expression and aggregate scores; aggregate J&F is always computed
    as (J + F) / 2, never stored separately."""

    per_expression: dict[tuple[str, str], FrameScore]
    aggregate_j: float
    aggregate_f: float

    @property
    def aggregate_jf(self) -> float:
        return (self.aggregate_j + self.aggregate_f) / 2.0

    @classmethod
    def from_scores(cls, per_expression: Mapping[tuple[str, str], FrameScore]) -> "EvalReport":
        """Aggregate by unweighted mean over expressions (sorted key order)."""
        keys = sorted(per_expression)
        scores = {k: per_expression[k] for k in keys}
        if keys:
            agg_j = sum(scores[k].j for k in keys) / len(keys)
            agg_f = sum(scores[k].f for k in keys) / len(keys)
        else:
            agg_j = agg_f = 0.0
        return cls(scores, agg_j, agg_f)

    def to_json_dict(self) -> dict:
        return {
            "aggregate": {
                "J": percent(self.aggregate_j),
                "F": percent(self.aggregate_f),
                "J&F": percent(self.aggregate_jf),
            },
            "per_expression": {
                f"{vid}/{eid}": {"J": percent(s.j), "F": percent(s.f)}
                for (vid, eid), s in sorted(self.per_expression.items())
            },
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "EvalReport":
        per_expression: dict[tuple[str, str], FrameScore] = {}
        for key, entry in data.get("per_expression", {}).items():
            vid, _, eid = key.partition("/")
            per_expression[(vid, eid)] = FrameScore(entry["J"] / 100.0, entry["F"] / 100.0)
        aggregate = data.get("aggregate")
        if aggregate is not None:
            agg_j = aggregate["J"] / 100.0
            agg_f = aggregate["F"] / 100.0
            return cls(per_expression, agg_j, agg_f)
        return cls.from_scores(per_expression)


def _score_pair_files(pred_paths: list[str], gt_paths: list[str],
                      tolerance_px: int | None) -> tuple[float, float]:
    j_total = 0.0
    f_total = 0.0
    for pred_path, gt_path in zip(pred_paths, gt_paths):
        gt_arr = read_mask_array(gt_path)
        pred_arr = read_mask_array(pred_path)
        if pred_arr.shape != gt_arr.shape:
            raise ShapeError(
                f"prediction {pred_path} is {pred_arr.shape}, ground truth is {gt_arr.shape}"
            )
        j, f = score_frame_arrays(pred_arr, gt_arr, tolerance_px)
        j_total += j
        f_total += f
    n = len(gt_paths)
    return j_total / n, f_total / n


def _score_expression_job(args) -> tuple[str, str, float, float]:
    video_id, expression_id, pred_paths, gt_paths, tolerance_px = args
    j, f = _score_pair_files(pred_paths, gt_paths, tolerance_px)
    return video_id, expression_id, j, f


def _pool_init() -> None:
    # One expression per task already saturates the pool; OpenCV's own
    # threading would only oversubscribe.
    cv2.setNumThreads(0)


def evaluate_dataset(pred_root, gt_root, dataset: DatasetIndex, *,
                     tolerance_px: int | None = None,
                     workers: int | None = None,
                     score_missing_zero: bool = False) -> EvalReport:
    """Score every dataset expression: per-expression frame means, then an
    unweighted mean over expressions.

    Both roots follow the annotation layout
    ``<root>/Annotations/<video>/<expression>/<frame>.png``. An expression
    with any missing prediction file raises :class:`MissingPredictionError`
    listing the pairs, or scores (0, 0) under ``score_missing_zero``.
    """
    pred_root = Path(pred_root)
    gt_root = Path(gt_root)
    jobs = []
    zero_scored: list[tuple[str, str]] = []
    missing: list[tuple[str, str]] = []
    for expr in dataset.expressions:
        video = dataset.videos[expr.video_id]
        pred_dir = pred_root / "Annotations" / expr.video_id / expr.expression_id
        gt_dir = gt_root / "Annotations" / expr.video_id / expr.expression_id
        pred_paths = []
        gt_paths = []
        complete = True
        for frame_id in video.frame_ids:
            gt_path = gt_dir / f"{frame_id}{MASK_SUFFIX}"
            if not gt_path.is_file():
                raise DatasetFormatError(
                    f"ground truth mask missing for {expr.video_id}/{expr.expression_id}: {gt_path}"
                )
            pred_path = pred_dir / f"{frame_id}{MASK_SUFFIX}"
            if not pred_path.is_file():
                complete = False
                break
            gt_paths.append(str(gt_path))
            pred_paths.append(str(pred_path))
        if complete:
            jobs.append((expr.video_id, expr.expression_id, pred_paths, gt_paths, tolerance_px))
        else:
            missing.append((expr.video_id, expr.expression_id))
    if missing and not score_missing_zero:
        raise MissingPredictionError(missing)
    zero_scored = missing

    scores: dict[tuple[str, str], FrameScore] = {}
    if workers is None:
        workers = os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_pool_init) as pool:
            for video_id, expression_id, j, f in pool.map(_score_expression_job, jobs, chunksize=1):
                scores[(video_id, expression_id)] = FrameScore(j, f)
    else:
        for job in jobs:
            video_id, expression_id, j, f = _score_expression_job(job)
            scores[(video_id, expression_id)] = FrameScore(j, f)
    for pair in zero_scored:
        scores[pair] = FrameScore(0.0, 0.0)
    return EvalReport.from_scores(scores)
