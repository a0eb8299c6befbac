"""MeViS-layout dataset ingestion.

Expected tree (the split directory)::

    <root>/JPEGImages/<video_id>/<frame_id>.jpg
    <root>/meta_expressions.json
    <root>/Annotations/<video_id>/<expression_id>/<frame_id>.png   (optional)

``meta_expressions.json`` holds ``{"videos": {video_id: {"frames": [...],
"expressions": {expression_id: {"exp": "..."}}}}}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from .errors import DatasetFormatError, IoError
from .masks import MaskSequence, load_mask_png

MANIFEST_NAME = "meta_expressions.json"
FRAME_SUFFIX = ".jpg"
MASK_SUFFIX = ".png"


@dataclass(frozen=True)
class VideoSequence:
    """Ordered frames of one video; all frames share the same dimensions."""

    video_id: str
    frame_ids: tuple[str, ...]
    height: int
    width: int
    frames_dir: Path

    def __post_init__(self):
        object.__setattr__(self, "frame_ids", tuple(self.frame_ids))
        object.__setattr__(self, "frames_dir", Path(self.frames_dir))
        if not self.frame_ids:
            raise DatasetFormatError(f"video {self.video_id!r} has no frames")
        if list(self.frame_ids) != sorted(set(self.frame_ids)):
            raise DatasetFormatError(f"video {self.video_id!r} frame ids must be unique and sorted")
        if self.height < 1 or self.width < 1:
            raise DatasetFormatError(f"video {self.video_id!r} has invalid dimensions")

    @property
    def frame_count(self) -> int:
        return len(self.frame_ids)

    def frame_path(self, index: int) -> Path:
        return self.frames_dir / f"{self.frame_ids[index]}{FRAME_SUFFIX}"

    def frame_paths(self) -> list[Path]:
        return [self.frame_path(i) for i in range(self.frame_count)]


@dataclass(frozen=True)
class ReferringExpression:
    """One natural-language query bound to a video."""

    video_id: str
    expression_id: str
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise DatasetFormatError(
                f"expression {self.video_id}/{self.expression_id} has empty text"
            )


@dataclass(frozen=True)
class DatasetIndex:
    """Loaded view of one split: videos, expressions, and layout paths."""

    root: Path
    split: str
    videos: dict[str, VideoSequence]
    expressions: tuple[ReferringExpression, ...]
    annotations_present: bool

    def video_for(self, expression: ReferringExpression) -> VideoSequence:
        return self.videos[expression.video_id]

    def annotation_dir(self, video_id: str, expression_id: str) -> Path:
        return self.root / "Annotations" / video_id / expression_id

    def pairs(self) -> list[tuple[VideoSequence, ReferringExpression]]:
        return [(self.videos[e.video_id], e) for e in self.expressions]


def _read_image_size(path: Path) -> tuple[int, int]:
    """Return (height, width) of an image file."""
    try:
        with Image.open(path) as img:
            return img.height, img.width
    except FileNotFoundError:
        raise IoError(path, "frame image missing") from None
    except (UnidentifiedImageError, OSError) as exc:
        raise IoError(path, f"unreadable frame image ({exc})") from exc


def resolve_split_root(root, split: str) -> Path:
    """Pick the directory holding the manifest: ``root/split`` if present, else ``root``."""
    root = Path(root)
    candidate = root / split
    if (candidate / MANIFEST_NAME).is_file():
        return candidate
    return root


def load_dataset(root, split: str = "valid") -> DatasetIndex:
    """Load a dataset split into an immutable index.

    Frame dimensions are read from the first frame of each video and checked
    against the last frame; per-frame checks beyond that happen lazily when
    frames are accessed.
    """
    split_root = resolve_split_root(root, split)
    manifest_path = split_root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DatasetFormatError(f"manifest not found: {manifest_path}")
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetFormatError(f"cannot parse manifest {manifest_path}: {exc}") from exc

    videos_obj = manifest.get("videos")
    if not isinstance(videos_obj, dict):
        raise DatasetFormatError(f"manifest {manifest_path} lacks a 'videos' object")

    images_root = split_root / "JPEGImages"
    videos: dict[str, VideoSequence] = {}
    expressions: list[ReferringExpression] = []
    for video_id in sorted(videos_obj):
        entry = videos_obj[video_id]
        if not isinstance(entry, dict):
            raise DatasetFormatError(f"manifest entry for video {video_id!r} is not an object")
        frames_dir = images_root / video_id
        if not frames_dir.is_dir():
            raise DatasetFormatError(f"video {video_id!r} listed in manifest has no JPEGImages folder")
        frame_ids = entry.get("frames")
        if not isinstance(frame_ids, list) or not frame_ids:
            raise DatasetFormatError(f"video {video_id!r} has no frame list in manifest")
        frame_ids = sorted(str(f) for f in frame_ids)
        if len(set(frame_ids)) != len(frame_ids):
            raise DatasetFormatError(f"video {video_id!r} has duplicate frame ids")

        first = frames_dir / f"{frame_ids[0]}{FRAME_SUFFIX}"
        height, width = _read_image_size(first)
        # Verify one more frame per video; full checks would decode the whole dataset.
        if len(frame_ids) > 1:
            last = frames_dir / f"{frame_ids[-1]}{FRAME_SUFFIX}"
            other = _read_image_size(last)
            if other != (height, width):
                raise DatasetFormatError(
                    f"video {video_id!r} frame dimensions differ: "
                    f"{first.name} is {height}x{width}, {last.name} is {other[0]}x{other[1]}"
                )
        videos[video_id] = VideoSequence(video_id, tuple(frame_ids), height, width, frames_dir)

        exprs_obj = entry.get("expressions", {})
        if not isinstance(exprs_obj, dict):
            raise DatasetFormatError(f"video {video_id!r} expressions must be an object")
        for expression_id in sorted(exprs_obj):
            body = exprs_obj[expression_id]
            if not isinstance(body, dict) or "exp" not in body:
                raise DatasetFormatError(
                    f"expression {video_id}/{expression_id} lacks an 'exp' field"
                )
            expressions.append(ReferringExpression(video_id, str(expression_id), str(body["exp"])))

    return DatasetIndex(
        root=split_root,
        split=split,
        videos=videos,
        expressions=tuple(expressions),
        annotations_present=(split_root / "Annotations").is_dir(),
    )


def load_annotation_masks(index: DatasetIndex, video: VideoSequence, expression_id: str) -> MaskSequence:
    """Read the per-frame ground-truth masks for one (video, expression) pair."""
    ann_dir = index.annotation_dir(video.video_id, expression_id)
    masks = []
    for frame_id in video.frame_ids:
        masks.append(load_mask_png(ann_dir / f"{frame_id}{MASK_SUFFIX}"))
    return MaskSequence(video.video_id, expression_id, tuple(masks))
