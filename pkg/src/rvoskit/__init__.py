"""rvoskit: referring video object segmentation pipeline and J&F evaluation."""

from .dataset import DatasetIndex, ReferringExpression, VideoSequence, load_dataset
from .masks import BinaryMask, MaskSequence, load_mask_png, rle_decode, rle_encode, save_mask_png, zero_mask_sequence
from .metrics import EvalReport, FrameScore, boundary_f, evaluate_dataset, evaluate_sequence, region_j
from .pipeline import PipelineConfig, run_dataset, run_expression
from .sampler import KeyFrameSet, SamplerConfig, Strategy, sample

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "DatasetIndex",
    "EvalReport",
    "FrameScore",
    "KeyFrameSet",
    "MaskSequence",
    "PipelineConfig",
    "ReferringExpression",
    "SamplerConfig",
    "Strategy",
    "VideoSequence",
    "boundary_f",
    "evaluate_dataset",
    "evaluate_sequence",
    "load_dataset",
    "load_mask_png",
    "region_j",
    "rle_decode",
    "rle_encode",
    "run_dataset",
    "run_expression",
    "sample",
    "save_mask_png",
    "zero_mask_sequence",
    "__version__",
]
