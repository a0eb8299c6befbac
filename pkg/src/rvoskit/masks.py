"""Run-length-encoded binary masks and mask image I/O.

The RLE convention used throughout the package: run lengths alternate
background / foreground, always starting with background, so an image whose
first pixel is foreground begins with a zero-length background run. Only the
first run may be zero, and runs sum to ``height * width``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

import cv2
import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CorruptMaskError, IoError, MaskFormatError, ShapeError

if TYPE_CHECKING:
    from .dataset import VideoSequence

# Low compression keeps batch prediction writes fast; bytes stay deterministic.
PNG_COMPRESS_LEVEL = 1


@dataclass(frozen=True)
class BinaryMask:
    """One frame's foreground mask, stored as alternating RLE run lengths."""

    height: int
    width: int
    runs: tuple[int, ...]

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise CorruptMaskError(f"mask dimensions must be positive, got {self.height}x{self.width}")
        runs = tuple(int(r) for r in self.runs)
        object.__setattr__(self, "runs", runs)
        if not runs:
            raise CorruptMaskError("run list is empty")
        if any(r < 0 for r in runs):
            raise CorruptMaskError("negative run length")
        if any(r == 0 for r in runs[1:]):
            raise CorruptMaskError("zero-length run after the first")
        total = sum(runs)
        if total != self.height * self.width:
            raise CorruptMaskError(
                f"runs sum to {total}, expected {self.height}x{self.width}={self.height * self.width}"
            )

    @property
    def area(self) -> int:
        return self.height * self.width

    @property
    def foreground_count(self) -> int:
        return sum(self.runs[1::2])

    def is_empty(self) -> bool:
        return self.foreground_count == 0

    def to_array(self) -> np.ndarray:
        return rle_decode(self)

    @classmethod
    def from_array(cls, bitmap: np.ndarray) -> "BinaryMask":
        return rle_encode(bitmap)

    @classmethod
    def zeros(cls, height: int, width: int) -> "BinaryMask":
        return cls(height, width, (height * width,))


def rle_encode(bitmap, height: int | None = None, width: int | None = None) -> BinaryMask:
    """Encode a row-major bit grid into a :class:`BinaryMask`.

    ``bitmap`` may be a 2-D array (dimensions inferred) or a flat sequence, in
    which case ``height`` and ``width`` are required.
    """
    arr = np.asarray(bitmap)
    if arr.ndim == 2:
        h, w = arr.shape
        if height is not None and width is not None and (height, width) != (h, w):
            raise ShapeError(f"bitmap is {h}x{w} but {height}x{width} was declared")
    elif arr.ndim == 1:
        if height is None or width is None:
            raise ShapeError("flat bitmap requires explicit height and width")
        h, w = int(height), int(width)
        if arr.size != h * w:
            raise ShapeError(f"bitmap length {arr.size} != {h}x{w}={h * w}")
    else:
        raise ShapeError(f"bitmap must be 1-D or 2-D, got {arr.ndim}-D")

    flat = arr.reshape(-1).astype(bool)
    if flat.size == 0:
        raise ShapeError("bitmap is empty")
    changes = np.flatnonzero(np.diff(flat.view(np.int8)))
    bounds = np.concatenate(([0], changes + 1, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs = [0] + runs
    return BinaryMask(h, w, tuple(runs))


def rle_decode(mask: BinaryMask) -> np.ndarray:
    """Decode a mask into a row-major boolean grid of shape (height, width)."""
    values = np.zeros(len(mask.runs), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, mask.runs)
    return flat.reshape(mask.height, mask.width)


_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

# IHDR color types: 0 grayscale, 2 RGB, 3 palette, 4 gray+alpha, 6 RGBA.
_PNG_GRAY = 0
_PNG_PALETTE = 3


def _decode_mask_png(data: bytes, path: Path) -> np.ndarray:
    """Decode and validate mask PNG bytes into a uint8 pixel grid.

    The IHDR header is checked directly: bit depth must be 8 and the color
    type grayscale or palette. Grayscale images take the fast cv2 route;
    palette and interlaced ones go through PIL (palette indices are used
    as-is, so palette index 1 and grayscale 255 both count as foreground).
    """
    if len(data) < 29 or not data.startswith(_PNG_SIGNATURE) or data[12:16] != b"IHDR":
        raise MaskFormatError(f"mask must be a PNG file: {path}")
    bit_depth = data[24]
    color_type = data[25]
    interlaced = data[28] != 0
    if bit_depth != 8 or color_type not in (_PNG_GRAY, _PNG_PALETTE):
        raise MaskFormatError(
            f"mask must be an 8-bit single-channel or paletted PNG, got bit depth "
            f"{bit_depth} and color type {color_type}: {path}"
        )
    if color_type == _PNG_GRAY and not interlaced:
        arr = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_GRAYSCALE)
        if arr is None:
            raise MaskFormatError(f"cannot decode mask PNG: {path}")
        return arr
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise MaskFormatError(f"cannot decode mask PNG: {path} ({exc})") from exc
    return np.asarray(img)


def read_mask_array(path) -> np.ndarray:
    """Read a mask PNG as a boolean grid; any pixel value > 0 is foreground.

    Accepts 8-bit single-channel or paletted PNGs only.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise IoError(path, "mask file not found") from None
    except OSError as exc:
        raise IoError(path, f"cannot read mask ({exc})") from exc
    return _decode_mask_png(data, path) > 0


def load_mask_png(path) -> BinaryMask:
    """Load a mask PNG into a :class:`BinaryMask` (pixel > 0 is foreground)."""
    return rle_encode(read_mask_array(path))


def save_mask_png(mask: BinaryMask, path) -> None:
    """Write an 8-bit grayscale PNG with foreground 255 and background 0."""
    path = Path(path)
    arr = rle_decode(mask).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path, format="PNG", compress_level=PNG_COMPRESS_LEVEL)


@dataclass(frozen=True)
class MaskSequence:
    """Per-frame masks for one (video, expression) pair, one mask per frame."""

    video_id: str
    expression_id: str
    masks: tuple[BinaryMask, ...]

    def __post_init__(self):
        object.__setattr__(self, "masks", tuple(self.masks))
        sizes = {(m.height, m.width) for m in self.masks}
        if len(sizes) > 1:
            raise ShapeError(f"masks in a sequence must share dimensions, got {sorted(sizes)}")

    def __len__(self) -> int:
        return len(self.masks)

    def __iter__(self) -> Iterable[BinaryMask]:
        return iter(self.masks)

    def __getitem__(self, index: int) -> BinaryMask:
        return self.masks[index]


def zero_mask_sequence(video: "VideoSequence", expression_id: str = "") -> MaskSequence:
    """All-background masks for every frame of ``video``."""
    zero = BinaryMask.zeros(video.height, video.width)
    return MaskSequence(video.video_id, expression_id, (zero,) * video.frame_count)
