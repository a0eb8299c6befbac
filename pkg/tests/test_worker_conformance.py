"""Protocol conformance suite for the reference worker processes.

Drives the TypeScript stub workers (workers/dist) entirely through the
primary package's worker client and pipeline: handshake, framing, ordering,
error replies, RLE mask round-trip, and transcript determinism.
"""

from __future__ import annotations

import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from rvoskit.cli import main as cli_main
from rvoskit.dataset import load_annotation_masks, load_dataset
from rvoskit.errors import BackendError
from rvoskit.masks import rle_decode
from rvoskit.metrics import region_j_arrays
from rvoskit.sampler import KeyFrameSet, SamplerConfig
from rvoskit.segmenter import Coverage, WorkerSegmenterBackend, run_segmentation
from rvoskit.synth import SynthSpec, generate_dataset
from rvoskit.vlc import MOCK_NO_MARKER, VideoLanguageChecker, WorkerCheckerBackend
from rvoskit.worker import WorkerPool, WorkerProcess

WORKERS_DIST = Path(__file__).resolve().parent.parent / "workers" / "dist"
CHECKER_JS = WORKERS_DIST / "checker.js"
SEGMENTER_JS = WORKERS_DIST / "segmenter.js"

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None or not CHECKER_JS.is_file(),
    reason="requires node and the built workers (run `npm run build` in workers/)",
)


def checker_cmd() -> list[str]:
    return ["node", str(CHECKER_JS)]


def segmenter_cmd() -> list[str]:
    return ["node", str(SEGMENTER_JS)]


@pytest.fixture(scope="module")
def worker_dataset(tmp_path_factory):
    root = generate_dataset(
        tmp_path_factory.mktemp("workerds"),
        SynthSpec(videos=3, expressions_per_video=2, absent_per_video=1,
                  frames=5, height=96, width=128, seed=51),
    )
    return load_dataset(root, "valid")


class TestCheckerConformance:
    def test_handshake_name(self):
        with WorkerProcess(checker_cmd()) as worker:
            assert worker.name == "stub-checker"

    def test_marker_rule_through_primary_client(self, worker_dataset):
        with WorkerPool(checker_cmd(), size=1) as pool:
            checker = VideoLanguageChecker(WorkerCheckerBackend(pool),
                                           SamplerConfig(strategy="uniform", budget=3))
            for expr in worker_dataset.expressions:
                video = worker_dataset.videos[expr.video_id]
                verdict = checker.check(video, expr)
                assert verdict.matches == (MOCK_NO_MARKER not in expr.text)
                assert verdict.backend_id == "stub-checker"

    def test_response_order_matches_request_order(self):
        lines = [json.dumps({"op": "check", "video_id": "v", "expression": text,
                             "prompt": "p", "frames": ["f"]})
                 for text in ("one", "ABSENT two", "three", "ABSENT four")]
        result = subprocess.run(checker_cmd(), input="\n".join(lines) + "\n",
                                capture_output=True, text=True, timeout=60)
        answers = [json.loads(line)["answer"] for line in result.stdout.splitlines()]
        assert answers == ["yes", "no", "yes", "no"]

    def test_golden_transcript_replay_is_byte_identical(self):
        lines = (
            '{"op":"hello"}\n'
            '{"op":"check","video_id":"a","expression":"a cat","prompt":"p","frames":["x"]}\n'
            "this is not json\n"
            '{"op":"check","video_id":"b","expression":"ABSENT","prompt":"p","frames":["y"]}\n'
            '{"op":"what"}\n'
        )
        runs = [subprocess.run(checker_cmd(), input=lines.encode(), capture_output=True,
                               timeout=60).stdout for _ in range(2)]
        assert runs[0] == runs[1]
        assert runs[0].count(b"\n") == 5

    def test_error_reply_surfaces_as_backend_error(self):
        with WorkerProcess(checker_cmd()) as worker:
            with pytest.raises(BackendError):
                worker.request({"op": "segment"})


class TestSegmenterConformance:
    def test_handshake_declares_coverage(self):
        with WorkerPool(segmenter_cmd(), size=1) as pool:
            backend = WorkerSegmenterBackend(pool)
            assert backend.name == "stub"
            assert backend.coverage is Coverage.KEY_FRAMES_ONLY

    def test_masks_round_trip_and_track_the_object(self, worker_dataset):
        expr = next(e for e in worker_dataset.expressions if MOCK_NO_MARKER not in e.text)
        video = worker_dataset.videos[expr.video_id]
        gt = load_annotation_masks(worker_dataset, video, expr.expression_id)
        with WorkerPool(segmenter_cmd(), size=1) as pool:
            backend = WorkerSegmenterBackend(pool)
            keyframes = KeyFrameSet(tuple(range(video.frame_count)))
            result = run_segmentation(backend, video, expr, keyframes)
        assert len(result) == video.frame_count
        for predicted, truth in zip(result, gt):
            pred_arr = rle_decode(predicted)
            assert pred_arr.shape == (video.height, video.width)
            # thresholding JPEG frames recovers the rectangle up to edge fuzz
            assert region_j_arrays(pred_arr, rle_decode(truth)) > 0.8

    def test_replay_returns_identical_masks(self, worker_dataset):
        expr = worker_dataset.expressions[0]
        video = worker_dataset.videos[expr.video_id]
        request = json.dumps({
            "op": "segment",
            "video_id": video.video_id,
            "expression": expr.text,
            "height": video.height,
            "width": video.width,
            "key_frames": [{"index": 0, "path": str(video.frame_path(0))}],
            "all_frames": [str(p) for p in video.frame_paths()],
        })
        outputs = [subprocess.run(segmenter_cmd(), input=request + "\n",
                                  capture_output=True, text=True, timeout=60).stdout
                   for _ in range(2)]
        assert outputs[0] == outputs[1]
        masks = json.loads(outputs[0])["masks"]
        assert masks[0]["index"] == 0
        assert sum(masks[0]["rle"]) == video.height * video.width


class TestPipelineWithWorkers:
    def test_cli_run_and_eval_with_both_workers(self, worker_dataset, tmp_path, capsys):
        out = tmp_path / "pred"
        code = cli_main([
            "run",
            "--dataset", str(worker_dataset.root),
            "--out", str(out),
            "--segmenter", f"node {SEGMENTER_JS}",
            "--vlc", f"node {CHECKER_JS}",
            "--kfs-strategy", "uniform",
            "--kfs-number", "3",
            "--pool", "2",
        ])
        assert code == 0
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert manifest["backends"] == {"segmenter": "stub", "vlc": "stub-checker"}
        marked = sum(1 for e in worker_dataset.expressions if MOCK_NO_MARKER in e.text)
        assert manifest["counts"]["gated_zero"] == marked
        assert manifest["counts"]["ok"] == len(worker_dataset.expressions) - marked

        report_path = tmp_path / "report.json"
        code = cli_main([
            "eval",
            "--pred", str(out),
            "--dataset", str(worker_dataset.root),
            "--out", str(report_path),
        ])
        assert code == 0
        report = json.loads(report_path.read_text())
        for key, scores in report["per_expression"].items():
            vid, eid = key.split("/")
            expr = next(e for e in worker_dataset.expressions
                        if e.video_id == vid and e.expression_id == eid)
            if MOCK_NO_MARKER in expr.text:
                assert scores["J"] == 0.0
            else:
                assert scores["J"] > 80.0
