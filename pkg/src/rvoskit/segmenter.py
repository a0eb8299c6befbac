"""Segmentation backend contract, built-in test backends, and propagation.

A backend produces masks for the sampled key frames (or, if it tracks
objects itself, for the whole video). Key-frame masks are then extended to
every frame by nearest-key-frame copy: a deterministic stand-in for learned
mask propagation that defines the contract full-sequence backends replace.
"""

from __future__ import annotations

import bisect
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Protocol, runtime_checkable

from .dataset import MASK_SUFFIX, DatasetIndex, ReferringExpression, VideoSequence
from .errors import CorruptMaskError, InvalidInputError, ProtocolError, ShapeError
from .masks import BinaryMask, MaskSequence, load_mask_png
from .sampler import KeyFrameSet
from .worker import WorkerPool


class Coverage(Enum):
    KEY_FRAMES_ONLY = "key_frames_only"
    FULL_SEQUENCE = "full_sequence"

    @classmethod
    def parse(cls, value) -> "Coverage":
        if isinstance(value, cls):
            return value
        for coverage in cls:
            if coverage.value == value:
                return coverage
        raise ProtocolError(f"unknown coverage {value!r}; expected one of "
                            f"{[c.value for c in cls]}")


@dataclass(frozen=True)
class SegmentRequest:
    """Everything a backend needs to segment one expression's key frames.

    ``expression_id`` is orchestration metadata for in-process backends (the
    oracle uses it to locate ground truth); it does not cross the wire.
    """

    video_id: str
    expression_id: str
    expression_text: str
    key_frames: KeyFrameSet
    key_frame_paths: tuple[Path, ...]
    height: int
    width: int
    all_frame_paths: tuple[Path, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "key_frame_paths", tuple(Path(p) for p in self.key_frame_paths))
        object.__setattr__(self, "all_frame_paths", tuple(Path(p) for p in self.all_frame_paths))
        if len(self.key_frame_paths) != len(self.key_frames):
            raise InvalidInputError(
                f"{len(self.key_frame_paths)} paths for {len(self.key_frames)} key frames"
            )


@dataclass(frozen=True)
class KeyFrameMasks:
    """Backend output: frame index -> mask, plus how much it covered."""

    masks: Mapping[int, BinaryMask]
    coverage: Coverage

    def __post_init__(self):
        object.__setattr__(self, "masks", dict(self.masks))


@runtime_checkable
class SegmenterBackend(Protocol):
    name: str
    coverage: Coverage

    def segment(self, request: SegmentRequest) -> Mapping[int, BinaryMask]: ...


class ConstantEmptySegmenterBackend:
    """Returns an all-background mask for every requested key frame."""

    def __init__(self):
        self.name = "constant-empty"
        self.coverage = Coverage.KEY_FRAMES_ONLY

    def segment(self, request: SegmentRequest) -> dict[int, BinaryMask]:
        empty = BinaryMask.zeros(request.height, request.width)
        return {index: empty for index in request.key_frames}


class OracleSegmenterBackend:
    """Reads ground-truth annotation masks; the upper-bound reference backend."""

    def __init__(self, dataset: DatasetIndex, annotations_root: Path | None = None):
        self.name = "oracle"
        self.coverage = Coverage.KEY_FRAMES_ONLY
        self._dataset = dataset
        self._root = Path(annotations_root) if annotations_root is not None else dataset.root

    def segment(self, request: SegmentRequest) -> dict[int, BinaryMask]:
        video = self._dataset.videos.get(request.video_id)
        if video is None:
            raise InvalidInputError(f"oracle has no video {request.video_id!r}")
        mask_dir = self._root / "Annotations" / request.video_id / request.expression_id
        out = {}
        for index in request.key_frames:
            out[index] = load_mask_png(mask_dir / f"{video.frame_ids[index]}{MASK_SUFFIX}")
        return out


class TranscriptSegmenterBackend:
    """Replays a recorded session: each request must match the recording and
    yields the recorded wire response."""

    def __init__(self, transcript: list[tuple[dict, dict]], name: str = "transcript",
                 coverage: Coverage = Coverage.KEY_FRAMES_ONLY):
        self.name = name
        self.coverage = coverage
        self._transcript = list(transcript)
        self._next = 0
        self._lock = threading.Lock()

    def segment(self, request: SegmentRequest) -> dict[int, BinaryMask]:
        wire = segment_request_wire(request)
        with self._lock:
            if self._next >= len(self._transcript):
                raise ProtocolError("transcript exhausted: more requests than recorded")
            expected, reply = self._transcript[self._next]
            self._next += 1
        if wire != expected:
            raise ProtocolError(f"request diverged from transcript at entry {self._next - 1}")
        return parse_segment_reply(reply, request)


def segment_request_wire(request: SegmentRequest) -> dict:
    return {
        "op": "segment",
        "video_id": request.video_id,
        "expression": request.expression_text,
        "height": request.height,
        "width": request.width,
        "key_frames": [
            {"index": index, "path": str(path)}
            for index, path in zip(request.key_frames, request.key_frame_paths)
        ],
        "all_frames": [str(p) for p in request.all_frame_paths],
    }


def parse_segment_reply(reply: dict, request: SegmentRequest) -> dict[int, BinaryMask]:
    entries = reply.get("masks")
    if not isinstance(entries, list):
        raise ProtocolError(f"segment reply lacks a 'masks' list: {reply!r}")
    masks: dict[int, BinaryMask] = {}
    for entry in entries:
        if not isinstance(entry, dict) or "index" not in entry or "rle" not in entry:
            raise ProtocolError(f"malformed mask entry: {entry!r}")
        index = entry["index"]
        if not isinstance(index, int) or index in masks:
            raise ProtocolError(f"bad or duplicate mask index: {entry['index']!r}")
        runs = entry["rle"]
        if not isinstance(runs, list) or not all(isinstance(r, int) for r in runs):
            raise ProtocolError(f"mask RLE must be a list of integers: {runs!r}")
        if sum(runs) != request.height * request.width:
            raise ShapeError(
                f"frame {index}: mask covers {sum(runs)} pixels, expected "
                f"{request.height}x{request.width}={request.height * request.width}"
            )
        try:
            masks[index] = BinaryMask(request.height, request.width, tuple(runs))
        except CorruptMaskError as exc:
            raise ProtocolError(f"frame {index}: invalid RLE ({exc})") from exc
    return masks


class WorkerSegmenterBackend:
    """Segmenter backed by a pool of protocol worker processes."""

    def __init__(self, pool: WorkerPool):
        self.pool = pool
        meta = pool.meta()
        self.name = str(meta.get("name"))
        self.coverage = Coverage.parse(meta.get("coverage"))

    def segment(self, request: SegmentRequest) -> dict[int, BinaryMask]:
        with self.pool.borrow() as worker:
            reply = worker.request(segment_request_wire(request))
        return parse_segment_reply(reply, request)


def segment_key_frames(backend: SegmenterBackend, request: SegmentRequest) -> KeyFrameMasks:
    """Run the backend and validate its output against the request."""
    masks = backend.segment(request)
    if backend.coverage is Coverage.FULL_SEQUENCE:
        expected = set(range(len(request.all_frame_paths)))
    else:
        expected = set(request.key_frames)
    got = set(masks)
    if got != expected:
        raise ProtocolError(
            f"backend {backend.name!r} returned masks for frames {sorted(got)[:10]}..., "
            f"expected exactly {len(expected)} frames"
        )
    for index, mask in masks.items():
        if (mask.height, mask.width) != (request.height, request.width):
            raise ShapeError(
                f"frame {index}: mask is {mask.height}x{mask.width}, "
                f"expected {request.height}x{request.width}"
            )
    return KeyFrameMasks(masks, backend.coverage)


def propagate(key_masks: KeyFrameMasks, video: VideoSequence,
              expression_id: str = "") -> MaskSequence:
    """Extend key-frame masks to all frames by nearest-key-frame copy.

    Each frame receives the mask of its nearest key frame, ties going to the
    earlier one; key frames keep their own masks. Full-sequence input is
    returned unchanged.
    """
    if not key_masks.masks:
        raise InvalidInputError("cannot propagate from an empty key-frame set")
    if key_masks.coverage is Coverage.FULL_SEQUENCE:
        ordered = tuple(key_masks.masks[i] for i in range(video.frame_count))
        return MaskSequence(video.video_id, expression_id, ordered)
    keys = sorted(key_masks.masks)
    out = []
    for t in range(video.frame_count):
        pos = bisect.bisect_left(keys, t)
        if pos == 0:
            nearest = keys[0]
        elif pos == len(keys):
            nearest = keys[-1]
        else:
            before, after = keys[pos - 1], keys[pos]
            nearest = before if (t - before) <= (after - t) else after
        out.append(key_masks.masks[nearest])
    return MaskSequence(video.video_id, expression_id, tuple(out))


def run_segmentation(backend: SegmenterBackend, video: VideoSequence,
                     expression: ReferringExpression,
                     keyframes: KeyFrameSet) -> MaskSequence:
    """Segment the key frames, then propagate across the whole video."""
    request = SegmentRequest(
        video_id=video.video_id,
        expression_id=expression.expression_id,
        expression_text=expression.text,
        key_frames=keyframes,
        key_frame_paths=tuple(video.frame_path(i) for i in keyframes),
        height=video.height,
        width=video.width,
        all_frame_paths=tuple(video.frame_paths()),
    )
    key_masks = segment_key_frames(backend, request)
    return propagate(key_masks, video, expression.expression_id)
