"""Two-phase statement extraction behind a pluggable LLM client.

Phase 1 turns a review into candidate statements with kind labels;
phase 2 re-checks each kind with discriminative instructions. The client
interface has three bindings: a remote chat-completion endpoint, a
replay-from-fixture store for tests, and a lexicon-only degraded mode
that needs no model at all. Every request/response pair is kept for
audit; refused reviews are skipped and logged.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np

from .lexicon import LEXICON, classify_text
from .statements import ACStatement
from .wheel import OTHER, category_names

__all__ = [
    "LlmClient",
    "LlmRefusalError",
    "HttpLlmClient",
    "FixtureLlmClient",
    "PromptTemplates",
    "ExtractionPipeline",
    "LexiconExtractor",
    "extract_statements",
    "classify_emotions",
    "audit_sample",
    "AuditWorksheet",
]

API_KEY_ENV = "ACREC_LLM_API_KEY"


class ExtractionError(RuntimeError):
    pass


class LlmRefusalError(ExtractionError):
    """The provider declined to process the input (content policy)."""


class LlmClient(Protocol):
    def complete(self, messages: list[dict]) -> str: ...


def fixture_key(messages: list[dict]) -> str:
    canon = json.dumps(messages, sort_keys=True, separators=(",", ":"))
    return hashlib.blake2b(canon.encode("utf-8"), digest_size=16).hexdigest()


class HttpLlmClient:
    """POST {model, messages[]} -> {content}. The API key is read from the
    environment and never written to logs or errors."""

    def __init__(self, endpoint: str, model: str, timeout: float = 60.0):
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout

    def complete(self, messages: list[dict]) -> str:
        import httpx

        headers = {}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["authorization"] = f"Bearer {api_key}"
        resp = httpx.post(
            self.endpoint,
            json={"model": self.model, "messages": messages},
            headers=headers,
            timeout=self.timeout,
        )
        if resp.status_code == 400 and "content_policy" in resp.text:
            raise LlmRefusalError("provider refused the input under its content policy")
        resp.raise_for_status()
        return resp.json()["content"]


class FixtureLlmClient:
    """Replays canned responses keyed by a digest of the messages.

    Store format: JSONL of {"key": ..., "content": ...}; a record with
    {"refusal": true} replays a content-policy refusal.
    """

    def __init__(self, store: dict[str, dict] | None = None):
        self.store = store or {}

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureLlmClient":
        store = {}
        with Path(path).open("r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    rec = json.loads(line)
                    store[rec["key"]] = rec
        return cls(store)

    def record(self, messages: list[dict], content: str = "", refusal: bool = False) -> str:
        key = fixture_key(messages)
        self.store[key] = {"key": key, "content": content, "refusal": refusal}
        return key

    def complete(self, messages: list[dict]) -> str:
        key = fixture_key(messages)
        if key not in self.store:
            raise ExtractionError(f"no fixture for request {key}")
        rec = self.store[key]
        if rec.get("refusal"):
            raise LlmRefusalError("fixture replayed a content-policy refusal")
        return rec["content"]


@dataclass(frozen=True)
class PromptTemplates:
    phase1: str
    phase2: str
    emotion: str
    template_id: str = "v1"

    @classmethod
    def load(cls) -> "PromptTemplates":
        pkg = resources.files("acrec.taxonomy") / "prompts"
        return cls(
            phase1=(pkg / "phase1_extract.txt").read_text("utf-8"),
            phase2=(pkg / "phase2_refine.txt").read_text("utf-8"),
            emotion=(pkg / "emotion_map.txt").read_text("utf-8"),
        )


@dataclass
class ExtractionRequest:
    phase: int
    template_id: str
    review: str


@dataclass
class ExtractionResult:
    statements: list[ACStatement]
    raw_outputs: list[str]
    latency_s: float
    skipped: bool = False
    skip_reason: Optional[str] = None


@dataclass
class ExtractionLogEntry:
    review_digest: str
    phase: int
    ok: bool
    detail: str = ""


def _review_digest(review: str) -> str:
    return hashlib.blake2b(review.encode("utf-8"), digest_size=8).hexdigest()


def _parse_statement_json(raw: str) -> list[dict]:
    """The model must answer with a JSON array of {text, kind} objects;
    tolerate surrounding prose by extracting the outermost array."""
    match = re.search(r"\[.*\]", raw, re.DOTALL)
    if not match:
        raise ExtractionError("no JSON array in model output")
    items = json.loads(match.group(0))
    if not isinstance(items, list):
        raise ExtractionError("model output is not a list")
    out = []
    for item in items:
        if not isinstance(item, dict) or "text" not in item or "kind" not in item:
            raise ExtractionError(f"malformed statement item: {item!r}")
        out.append(item)
    return out


class ExtractionPipeline:
    """Two-phase extraction plus emotion mapping for A/AC statements."""

    def __init__(self, client: LlmClient, templates: Optional[PromptTemplates] = None,
                 use_lexicon_for_emotions: bool = False):
        self.client = client
        self.templates = templates or PromptTemplates.load()
        self.use_lexicon_for_emotions = use_lexicon_for_emotions
        self.log: list[ExtractionLogEntry] = []

    def phase1_messages(self, review: str) -> list[dict]:
        return [
            {"role": "system", "content": self.templates.phase1},
            {"role": "user", "content": review},
        ]

    def phase2_messages(self, statements: list[dict]) -> list[dict]:
        return [
            {"role": "system", "content": self.templates.phase2},
            {"role": "user", "content": json.dumps(statements, sort_keys=True)},
        ]

    def emotion_messages(self, text: str) -> list[dict]:
        return [
            {"role": "system", "content": self.templates.emotion},
            {"role": "user", "content": text},
        ]

    def _call(self, messages: list[dict], phase: int, digest: str) -> Optional[str]:
        """One call with a single retry on malformed output handled by the
        caller; refusals are terminal for the review."""
        try:
            return self.client.complete(messages)
        except LlmRefusalError as exc:
            self.log.append(ExtractionLogEntry(digest, phase, ok=False, detail=str(exc)))
            return None

    def extract(self, review: str) -> ExtractionResult:
        started = time.perf_counter()
        digest = _review_digest(review)
        raw_outputs: list[str] = []

        raw1 = self._call(self.phase1_messages(review), 1, digest)
        if raw1 is None:
            return ExtractionResult([], raw_outputs, time.perf_counter() - started,
                                    skipped=True, skip_reason="refused")
        raw_outputs.append(raw1)
        items = self._parse_with_retry(raw1, self.phase1_messages(review), 1, digest)
        if items is None:
            return ExtractionResult([], raw_outputs, time.perf_counter() - started,
                                    skipped=True, skip_reason="malformed phase-1 output")

        raw2 = self._call(self.phase2_messages(items), 2, digest)
        if raw2 is None:
            return ExtractionResult([], raw_outputs, time.perf_counter() - started,
                                    skipped=True, skip_reason="refused")
        raw_outputs.append(raw2)
        refined = self._parse_with_retry(raw2, self.phase2_messages(items), 2, digest)
        if refined is None:
            refined = items  # phase-2 is a refinement; fall back to phase-1 kinds

        statements = []
        for i, item in enumerate(refined):
            kind = str(item["kind"]).upper()
            if kind not in ("A", "C", "AC"):
                continue
            text = str(item["text"]).strip()
            if not text:
                continue
            categories: frozenset[str] = frozenset()
            if kind in ("A", "AC"):
                categories = self.map_emotions(text, digest)
            statements.append(
                ACStatement(
                    id=f"llm-{digest}-{i:03d}",
                    text=text,
                    kind=kind,
                    categories=categories,
                    source="llm",
                )
            )
        self.log.append(ExtractionLogEntry(digest, 2, ok=True, detail=f"{len(statements)} statements"))
        return ExtractionResult(statements, raw_outputs, time.perf_counter() - started)

    def _parse_with_retry(self, raw: str, messages: list[dict], phase: int, digest: str):
        try:
            return _parse_statement_json(raw)
        except (ExtractionError, json.JSONDecodeError) as first:
            retry = self._call(messages, phase, digest)
            if retry is None:
                return None
            try:
                return _parse_statement_json(retry)
            except (ExtractionError, json.JSONDecodeError):
                self.log.append(
                    ExtractionLogEntry(digest, phase, ok=False, detail=f"malformed output: {first}")
                )
                return None

    def map_emotions(self, text: str, digest: Optional[str] = None) -> frozenset[str]:
        """Wheel categories for one statement text; never empty (falls
        back to "Other")."""
        if self.use_lexicon_for_emotions:
            return classify_text(text)
        digest = digest or _review_digest(text)
        raw = self._call(self.emotion_messages(text), 3, digest)
        if raw is None:
            return frozenset({OTHER})
        try:
            names = json.loads(re.search(r"\[.*\]", raw, re.DOTALL).group(0))
        except Exception:  # noqa: BLE001 - malformed mapping falls back to Other
            return frozenset({OTHER})
        valid = frozenset(n for n in names if n in category_names())
        return valid if valid else frozenset({OTHER})


_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")
_CONTENT_MARKERS = frozenset(
    "story plot character characters writing prose style ending pacing narrative "
    "world setting structure chapters author twist mystery".split()
)
_NEGATIVE_MARKERS = frozenset("boring waste dnf worst refund skip".split())
_WORD_RE = re.compile(r"[a-z']+")


class LexiconExtractor:
    """Offline degraded mode: split a review into sentences, drop clearly
    negative ones, and label each by keyword evidence. A statement with
    emotion words is A, with both emotion and content words AC, with
    neither C."""

    def __init__(self):
        self.log: list[ExtractionLogEntry] = []

    def extract(self, review: str) -> ExtractionResult:
        started = time.perf_counter()
        digest = _review_digest(review)
        statements = []
        seq = 0
        for sentence in _SENTENCE_RE.split(review.strip()):
            sentence = sentence.strip()
            if not sentence:
                continue
            words = _WORD_RE.findall(sentence.lower())
            if any(w in _NEGATIVE_MARKERS for w in words):
                continue
            emotion_hit = any(w in LEXICON for w in words)
            content_hit = any(w in _CONTENT_MARKERS for w in words)
            if emotion_hit and content_hit:
                kind = "AC"
            elif emotion_hit:
                kind = "A"
            else:
                kind = "C"
            categories = classify_text(sentence) if kind in ("A", "AC") else frozenset()
            statements.append(
                ACStatement(
                    id=f"lex-{digest}-{seq:03d}",
                    text=sentence,
                    kind=kind,
                    categories=categories,
                    source="lexicon",
                )
            )
            seq += 1
        self.log.append(ExtractionLogEntry(digest, 1, ok=True, detail=f"{len(statements)} statements"))
        return ExtractionResult(statements, [], time.perf_counter() - started)


def extract_statements(review: str, extractor) -> list[ACStatement]:
    return extractor.extract(review).statements


def classify_emotions(statement: ACStatement, classifier) -> frozenset[str]:
    """Emotion categories for an A or AC statement.

    ``classifier`` is the string "lexicon" for the offline keyword path,
    or an ExtractionPipeline / LlmClient for model-backed mapping.
    Cognitive statements carry no emotions and are a caller error.
    """
    if statement.kind not in ("A", "AC"):
        raise ExtractionError(
            f"only A/AC statements map to emotion categories, got kind {statement.kind!r}"
        )
    if classifier == "lexicon":
        return classify_text(statement.text)
    pipeline = (
        classifier
        if isinstance(classifier, ExtractionPipeline)
        else ExtractionPipeline(classifier)
    )
    return pipeline.map_emotions(statement.text)


# -- audit -------------------------------------------------------------------

RUBRIC_QUESTIONS = (
    "excludes_book_title",
    "excludes_author_name",
    "excludes_character_names",
    "no_verbatim_book_text",
    "no_negative_sentiment",
    "excludes_chapter_page_refs",
)


@dataclass
class AuditWorksheet:
    rows: list[dict] = field(default_factory=list)

    def precision(self, affective_correct: Sequence[bool]) -> float:
        """Fraction of sampled statements whose affective-vs-objective
        labeling the annotator confirmed."""
        if len(affective_correct) != len(self.rows):
            raise ValueError(f"{len(affective_correct)} annotations for {len(self.rows)} rows")
        if not affective_correct:
            return 0.0
        return float(np.mean([1.0 if ok else 0.0 for ok in affective_correct]))


def audit_sample(statements: Sequence[ACStatement], n: int, rng: np.random.Generator) -> AuditWorksheet:
    """Draw n statements for human annotation against the six rubric
    questions; answers start blank."""
    if n > len(statements):
        raise ValueError(f"cannot sample {n} of {len(statements)} statements")
    picked = rng.choice(len(statements), size=n, replace=False)
    sheet = AuditWorksheet()
    for i in sorted(int(x) for x in picked):
        s = statements[i]
        row = {"id": s.id, "text": s.text, "kind": s.kind}
        row.update({q: None for q in RUBRIC_QUESTIONS})
        sheet.rows.append(row)
    return sheet
