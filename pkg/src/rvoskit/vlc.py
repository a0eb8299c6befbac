"""Video-language checking: prompt construction, verdict parsing, caching.

The checker decides whether an expression's subject and action actually occur
in the video; a negative verdict makes the pipeline emit all-zero masks for
that pair instead of running segmentation.
"""

from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

from .dataset import ReferringExpression, VideoSequence
from .errors import InvalidInputError, ProtocolError
from .sampler import SamplerConfig, sample
from .worker import WorkerPool

# Verification prompt sent to the checker backend ahead of the query text.
PROMPT_HEADER = (
    "Please check whether the video matches the input text, i.e., whether the "
    "subject described in the text exists in the video and whether the subject's "
    "action corresponds to the action described in the text. Output yes/no."
)

# Expressions containing this token are rejected by the mock/stub checkers;
# the synthetic dataset generator plants it to exercise the gating branch.
MOCK_NO_MARKER = "ABSENT"

_YES_NO = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


def build_prompt(expression_text: str) -> str:
    """Full checker prompt: the fixed yes/no instruction plus the query text."""
    return f"{PROMPT_HEADER}\nText: {expression_text}"


@dataclass(frozen=True)
class ParsedAnswer:
    """Boolean verdict plus whether a yes/no token was actually found."""

    matches: bool
    recognized: bool

    def __bool__(self) -> bool:
        return self.matches


def parse_answer(raw: str) -> ParsedAnswer:
    """Map free-form checker output to a verdict.

    Case-insensitive token scan; the first standalone "yes" or "no" wins.
    Answers containing neither fail open to "yes" with ``recognized=False``.
    """
    match = _YES_NO.search(raw)
    if match is None:
        return ParsedAnswer(matches=True, recognized=False)
    return ParsedAnswer(matches=match.group(1).lower() == "yes", recognized=True)


@dataclass(frozen=True)
class CheckRequest:
    video_id: str
    expression_id: str
    expression_text: str
    frame_paths: tuple[Path, ...]
    prompt: str

    def __post_init__(self):
        object.__setattr__(self, "frame_paths", tuple(Path(p) for p in self.frame_paths))
        if not self.frame_paths:
            raise InvalidInputError("check request needs at least one frame")
        if not self.prompt:
            raise InvalidInputError("check request needs a prompt")


@dataclass(frozen=True)
class CheckVerdict:
    matches: bool
    raw_answer: str
    backend_id: str
    parse_warning: bool = False


@runtime_checkable
class CheckerBackend(Protocol):
    """Anything that can answer a check request with free-form text."""

    backend_id: str

    def answer(self, request: CheckRequest) -> str: ...


class MockCheckerBackend:
    """Deterministic stand-in: rejects expressions containing the marker token."""

    def __init__(self, marker: str = MOCK_NO_MARKER):
        self.backend_id = "mock"
        self.marker = marker
        self.calls = 0
        self._lock = threading.Lock()

    def answer(self, request: CheckRequest) -> str:
        with self._lock:
            self.calls += 1
        return "no" if self.marker in request.expression_text else "yes"


class TranscriptCheckerBackend:
    """Replays a recorded sequence of raw answers, in order."""

    def __init__(self, answers: Sequence[str], backend_id: str = "transcript"):
        self.backend_id = backend_id
        self._answers = list(answers)
        self._next = 0
        self._lock = threading.Lock()

    def answer(self, request: CheckRequest) -> str:
        with self._lock:
            if self._next >= len(self._answers):
                raise ProtocolError("transcript exhausted: more checks than recorded answers")
            raw = self._answers[self._next]
            self._next += 1
            return raw


def check_request_wire(request: CheckRequest) -> dict:
    return {
        "op": "check",
        "video_id": request.video_id,
        "expression": request.expression_text,
        "prompt": request.prompt,
        "frames": [str(p) for p in request.frame_paths],
    }


class WorkerCheckerBackend:
    """Checker backed by a pool of protocol worker processes."""

    def __init__(self, pool: WorkerPool):
        self.pool = pool
        self.backend_id = str(pool.meta().get("name"))

    def answer(self, request: CheckRequest) -> str:
        with self.pool.borrow() as worker:
            reply = worker.request(check_request_wire(request))
        answer = reply.get("answer")
        if not isinstance(answer, str):
            raise ProtocolError(f"check reply lacks an 'answer' string: {reply!r}")
        return answer


class VideoLanguageChecker:
    """Builds requests, queries a backend, parses verdicts, caches results.

    The cache key includes the backend identity and a prompt content hash, so
    switching backends or editing the prompt template invalidates it. Cached
    verdicts are never overwritten.
    """

    def __init__(self, backend: CheckerBackend, sampler_cfg: SamplerConfig,
                 use_cache: bool = True):
        self.backend = backend
        self.sampler_cfg = sampler_cfg
        self.use_cache = use_cache
        self._cache: dict[tuple, CheckVerdict] = {}
        self._lock = threading.Lock()

    def build_request(self, video: VideoSequence, expression: ReferringExpression) -> CheckRequest:
        frames = sample(self.sampler_cfg, video.frame_count)
        return CheckRequest(
            video_id=video.video_id,
            expression_id=expression.expression_id,
            expression_text=expression.text,
            frame_paths=tuple(video.frame_path(i) for i in frames),
            prompt=build_prompt(expression.text),
        )

    def _cache_key(self, request: CheckRequest) -> tuple:
        prompt_hash = hashlib.sha256(request.prompt.encode("utf-8")).hexdigest()
        return (request.video_id, request.expression_id, self.backend.backend_id, prompt_hash)

    def check(self, video: VideoSequence, expression: ReferringExpression) -> CheckVerdict:
        request = self.build_request(video, expression)
        key = self._cache_key(request)
        if self.use_cache:
            with self._lock:
                cached = self._cache.get(key)
            if cached is not None:
                return cached
        raw = self.backend.answer(request)
        parsed = parse_answer(raw)
        verdict = CheckVerdict(
            matches=parsed.matches,
            raw_answer=raw,
            backend_id=self.backend.backend_id,
            parse_warning=not parsed.recognized,
        )
        if self.use_cache:
            with self._lock:
                verdict = self._cache.setdefault(key, verdict)
        return verdict


def check(video: VideoSequence, expression: ReferringExpression,
          sampler_cfg: SamplerConfig, backend: CheckerBackend) -> CheckVerdict:
    """One-shot verification of a (video, expression) pair."""
    return VideoLanguageChecker(backend, sampler_cfg, use_cache=False).check(video, expression)
