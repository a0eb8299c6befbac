"""Synthetic dataset generation: moving bright rectangles with exact masks.

Desk-scale test data in the standard layout. Every video contains one bright
rectangle on a dark background, fully in-bounds in every frame so all
ground-truth masks are non-empty. Each video's expressions all describe that
one object; a configurable number per video carry the checker-rejection
marker token to exercise the gating branch. Output is a pure function of the
SynthSpec (seed included): rerunning produces byte-identical trees.
"""

from __future__ import annotations

import json
import random
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import FRAME_SUFFIX, MANIFEST_NAME, MASK_SUFFIX
from .errors import InvalidInputError
from .masks import PNG_COMPRESS_LEVEL
from .vlc import MOCK_NO_MARKER

# Cycled per video index; video 0 is always the static-object video.
MOTIONS = ("static", "horizontal", "vertical", "diagonal")

JPEG_QUALITY = 95
BACKGROUND_LEVEL = 24
OBJECT_LEVEL = 222

_NOUNS = ("box", "panel", "tile", "card", "block", "sheet", "patch", "plate")


@dataclass(frozen=True)
class SynthSpec:
    videos: int = 5
    expressions_per_video: int = 2
    absent_per_video: int = 1
    frames: int = 8
    height: int = 64
    width: int = 96
    seed: int = 0
    vary_length: bool = True

    def __post_init__(self):
        if self.videos < 1 or self.expressions_per_video < 1 or self.frames < 1:
            raise InvalidInputError("videos, expressions_per_video and frames must be >= 1")
        if self.height < 16 or self.width < 16:
            raise InvalidInputError("synthetic frames must be at least 16x16")
        if self.absent_per_video >= self.expressions_per_video:
            raise InvalidInputError("each video needs at least one non-marker expression")


def motion_for(video_index: int) -> str:
    return MOTIONS[video_index % len(MOTIONS)]


def _rect_track(spec: SynthSpec, video_index: int, frame_count: int,
                rng: random.Random) -> list[tuple[int, int, int, int]]:
    """Per-frame (top, left, bottom, right) of the object, always in-bounds."""
    h, w = spec.height, spec.width
    obj_h = h // 4 + rng.randrange(max(1, h // 8))
    obj_w = w // 4 + rng.randrange(max(1, w // 8))
    top = rng.randrange(h - obj_h)
    left = rng.randrange(w - obj_w)
    motion = motion_for(video_index)
    dy = rng.choice((1, 2)) if motion in ("vertical", "diagonal") else 0
    dx = rng.choice((1, 2)) if motion in ("horizontal", "diagonal") else 0
    track = []
    y, x = top, left
    vy, vx = dy, dx
    for _ in range(frame_count):
        track.append((y, x, y + obj_h, x + obj_w))
        y += vy
        x += vx
        if y < 0 or y + obj_h > h:
            vy = -vy
            y += 2 * vy
        if x < 0 or x + obj_w > w:
            vx = -vx
            x += 2 * vx
        y = min(max(y, 0), h - obj_h)
        x = min(max(x, 0), w - obj_w)
    return track


def _expression_texts(spec: SynthSpec, video_index: int, motion: str,
                      rng: random.Random) -> list[str]:
    texts = []
    verb = {"static": "standing still", "horizontal": "sliding sideways",
            "vertical": "drifting downward", "diagonal": "moving diagonally"}[motion]
    for j in range(spec.expressions_per_video):
        noun = _NOUNS[(video_index + j) % len(_NOUNS)]
        if j >= spec.expressions_per_video - spec.absent_per_video:
            texts.append(f"the {MOCK_NO_MARKER} {noun} nobody can see ({j})")
        else:
            texts.append(f"the bright {noun} {verb} ({j})")
    return texts


def _write_video(out_root: Path, spec: SynthSpec, video_index: int) -> tuple[str, dict]:
    rng = random.Random(spec.seed * 1_000_003 + video_index)
    video_id = f"video_{video_index:03d}"
    frame_count = spec.frames + (video_index % 3 if spec.vary_length else 0)
    frame_ids = [f"{t:05d}" for t in range(frame_count)]
    track = _rect_track(spec, video_index, frame_count, rng)
    motion = motion_for(video_index)

    frames_dir = out_root / "JPEGImages" / video_id
    frames_dir.mkdir(parents=True, exist_ok=True)
    texts = _expression_texts(spec, video_index, motion, rng)
    expression_ids = [f"{j:05d}" for j in range(len(texts))]
    ann_dirs = [out_root / "Annotations" / video_id / eid for eid in expression_ids]
    for d in ann_dirs:
        d.mkdir(parents=True, exist_ok=True)

    for frame_id, (top, left, bottom, right) in zip(frame_ids, track):
        frame = np.full((spec.height, spec.width), BACKGROUND_LEVEL, dtype=np.uint8)
        frame[top:bottom, left:right] = OBJECT_LEVEL
        Image.fromarray(frame, mode="L").convert("RGB").save(
            frames_dir / f"{frame_id}{FRAME_SUFFIX}", format="JPEG", quality=JPEG_QUALITY
        )
        mask = np.zeros((spec.height, spec.width), dtype=np.uint8)
        mask[top:bottom, left:right] = 255
        first_mask = ann_dirs[0] / f"{frame_id}{MASK_SUFFIX}"
        Image.fromarray(mask, mode="L").save(
            first_mask, format="PNG", compress_level=PNG_COMPRESS_LEVEL
        )
        # Every expression of a video refers to its single object, so the
        # remaining annotation dirs are byte copies.
        for d in ann_dirs[1:]:
            shutil.copyfile(first_mask, d / f"{frame_id}{MASK_SUFFIX}")

    manifest_entry = {
        "frames": frame_ids,
        "expressions": {eid: {"exp": text} for eid, text in zip(expression_ids, texts)},
    }
    return video_id, manifest_entry


def generate_dataset(out_root, spec: SynthSpec) -> Path:
    """Write a synthetic dataset tree under ``out_root`` and return its path."""
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    videos = {}
    for i in range(spec.videos):
        video_id, entry = _write_video(out_root, spec, i)
        videos[video_id] = entry
    manifest = {"videos": {vid: videos[vid] for vid in sorted(videos)}}
    with open(out_root / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_root
