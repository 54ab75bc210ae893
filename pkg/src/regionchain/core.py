"""Domain value types and their canonical line-record encodings.

Every type here is a frozen dataclass. Constructors enforce invariants, so an
instance that exists is valid. ``to_record`` returns a plain dict whose key
order is part of the on-disk format (see ``docs/schemas.md``);
``from_record`` is its inverse and re-validates everything it reads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from .errors import ConstructionError

FLOAT_DECIMALS = 6


class Dataset(str, Enum):
    GQA = "gqa"
    DOCVQA = "docvqa"
    INFOVQA = "infovqa"
    TEXTVQA = "textvqa"
    VISUAL7W = "visual7w"
    VQAV2 = "vqav2"


class RegionSource(str, Enum):
    MODEL_PROPOSED = "model_proposed"
    OCR_CORRECTED = "ocr_corrected"
    OCR_KEYWORD_FALLBACK = "ocr_keyword_fallback"


class Role(str, Enum):
    KEYWORD_MATCH = "keyword_match"
    EVIDENCE = "evidence"
    CONCLUSION = "conclusion"
    DIRECT_ANSWER = "direct_answer"


class Relation(str, Enum):
    SEQUENTIAL = "sequential"
    PARALLEL = "parallel"
    NONE = "none"


class QuestionType(str, Enum):
    SEQUENTIAL = "sequential"
    PARALLEL = "parallel"


class Strategy(str, Enum):
    DIRECT = "direct"
    COCOT = "cocot"
    VISCOT = "viscot"
    MINUS_RAR = "minus_rar"
    REPLACED_RAR = "replaced_rar"
    QWEN_RAR = "qwen_rar"


def round_half_up(x: float) -> int:
    """Round to the nearest integer, ties toward +inf."""
    return math.floor(x + 0.5)


def _enum(cls: type[Enum], value: Any, what: str):
    try:
        return cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in cls)
        raise ConstructionError(f"{what} must be one of {{{allowed}}}, got {value!r}") from None


def _text(value: Any, what: str, *, allow_empty: bool = True) -> str:
    if not isinstance(value, str):
        raise ConstructionError(f"{what} must be text, got {type(value).__name__}")
    if not allow_empty and not value.strip():
        raise ConstructionError(f"{what} must be non-empty")
    return value


def _int(value: Any, what: str, *, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConstructionError(f"{what} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConstructionError(f"{what} must be >= {minimum}, got {value}")
    return value


def _set(obj: object, name: str, value: Any) -> None:
    object.__setattr__(obj, name, value)


# --------------------------------------------------------------------------
# Boxes and regions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in original-image pixels, ``x1 < x2`` and ``y1 < y2``."""

    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self) -> None:
        for name in ("x1", "y1", "x2", "y2"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConstructionError(f"bbox {name} must be a number, got {v!r}")
            if not math.isfinite(v):
                raise ConstructionError(f"bbox {name} must be finite, got {v!r}")
            if v != int(v):
                raise ConstructionError(f"bbox {name} must be integral pixels, got {v!r}")
            if v < 0:
                raise ConstructionError(f"bbox {name} must be >= 0, got {v!r}")
            _set(self, name, int(v))
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ConstructionError(f"degenerate bbox {self.as_list()}")

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2, (self.y1 + self.y2) / 2)

    def contains_point(self, x: float, y: float) -> bool:
        return self.x1 <= x <= self.x2 and self.y1 <= y <= self.y2

    def union(self, other: BBox) -> BBox:
        return BBox(
            min(self.x1, other.x1),
            min(self.y1, other.y1),
            max(self.x2, other.x2),
            max(self.y2, other.y2),
        )

    def as_list(self) -> list[int]:
        return [self.x1, self.y1, self.x2, self.y2]

    def __str__(self) -> str:
        return "[{}, {}, {}, {}]".format(*self.as_list())

    @classmethod
    def from_record(cls, rec: Any) -> BBox:
        if not isinstance(rec, (list, tuple)) or len(rec) != 4:
            raise ConstructionError(f"bbox must be a 4-element list, got {rec!r}")
        return make_bbox(*rec)


def make_bbox(x1: float, y1: float, x2: float, y2: float) -> BBox:
    """Build a box from any corner order; fractional input is rounded half-up."""
    coords = (x1, y1, x2, y2)
    for v in coords:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConstructionError(f"bbox coordinates must be finite numbers, got {coords!r}")
    ix1, iy1, ix2, iy2 = (round_half_up(v) for v in coords)
    if ix1 > ix2:
        ix1, ix2 = ix2, ix1
    if iy1 > iy2:
        iy1, iy2 = iy2, iy1
    return BBox(ix1, iy1, ix2, iy2)


@dataclass(frozen=True)
class Region:
    bbox: BBox
    description: str
    source: RegionSource = RegionSource.MODEL_PROPOSED
    # Per-region relation to the question, only present when the proposer
    # supplied one; consumed by the replaced-RAR inference strategy.
    relation: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.bbox, BBox):
            raise ConstructionError("region bbox must be a BBox")
        _set(self, "description", _text(self.description, "region description", allow_empty=False).strip())
        _set(self, "source", _enum(RegionSource, self.source, "region source"))
        _set(self, "relation", _text(self.relation, "region relation").strip())

    def to_record(self) -> dict[str, Any]:
        return {
            "bbox": self.bbox.as_list(),
            "description": self.description,
            "source": self.source.value,
            "relation": self.relation,
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> Region:
        return cls(
            bbox=BBox.from_record(_get(rec, "bbox")),
            description=_get(rec, "description"),
            source=_get(rec, "source"),
            relation=rec.get("relation", ""),
        )


def _get(rec: Mapping[str, Any], key: str) -> Any:
    if not isinstance(rec, Mapping):
        raise ConstructionError(f"expected an object, got {type(rec).__name__}")
    if key not in rec:
        raise ConstructionError(f"missing key {key!r}")
    return rec[key]


# --------------------------------------------------------------------------
# Samples
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Sample:
    sample_id: str
    dataset: Dataset
    image_path: str
    question: str
    answers: tuple[str, ...]

    def __post_init__(self) -> None:
        _text(self.sample_id, "sample_id", allow_empty=False)
        _set(self, "dataset", _enum(Dataset, self.dataset, "dataset"))
        _text(self.image_path, "image_path")
        _text(self.question, "question")
        if isinstance(self.answers, str):
            answers: tuple[str, ...] = (self.answers,)
        else:
            answers = tuple(self.answers)
        if not answers:
            raise ConstructionError(f"sample {self.sample_id}: answers must be non-empty")
        for a in answers:
            _text(a, "answer")
        _set(self, "answers", answers)

    def to_record(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "dataset": self.dataset.value,
            "image_path": self.image_path,
            "question": self.question,
            "answers": list(self.answers),
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> Sample:
        answers = _get(rec, "answers")
        if isinstance(answers, str):
            answers = [answers]
        if not isinstance(answers, list):
            raise ConstructionError("answers must be a list")
        return cls(
            sample_id=_get(rec, "sample_id"),
            dataset=_get(rec, "dataset"),
            image_path=_get(rec, "image_path"),
            question=_get(rec, "question"),
            answers=tuple(answers),
        )


@dataclass(frozen=True)
class GroundedSample:
    sample: Sample
    regions: tuple[Region, ...]
    keywords: tuple[str, ...] = ()
    image_size: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.sample, Sample):
            raise ConstructionError("grounded sample needs a Sample")
        regions = tuple(self.regions)
        if not regions:
            raise ConstructionError(f"sample {self.sample.sample_id}: at least one region required")
        _set(self, "regions", regions)
        _set(self, "keywords", tuple(_text(k, "keyword") for k in self.keywords))
        if self.image_size is not None:
            w, h = self.image_size
            _int(w, "image width", minimum=1)
            _int(h, "image height", minimum=1)
            _set(self, "image_size", (w, h))
            for r in regions:
                if r.bbox.x2 > w or r.bbox.y2 > h:
                    raise ConstructionError(
                        f"sample {self.sample.sample_id}: region {r.bbox} exceeds image {w}x{h}"
                    )

    @property
    def sample_id(self) -> str:
        return self.sample.sample_id

    def to_record(self) -> dict[str, Any]:
        rec = self.sample.to_record()
        rec["image_size"] = list(self.image_size) if self.image_size else None
        rec["regions"] = [r.to_record() for r in self.regions]
        rec["keywords"] = list(self.keywords)
        return rec

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> GroundedSample:
        size = rec.get("image_size")
        return cls(
            sample=Sample.from_record(rec),
            regions=tuple(Region.from_record(r) for r in _get(rec, "regions")),
            keywords=tuple(rec.get("keywords", ())),
            image_size=tuple(size) if size else None,
        )


# --------------------------------------------------------------------------
# OCR
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OcrWord:
    text: str
    bbox: BBox
    confidence: float = 1.0

    def __post_init__(self) -> None:
        _text(self.text, "ocr word text", allow_empty=False)
        if not isinstance(self.bbox, BBox):
            raise ConstructionError("ocr word bbox must be a BBox")
        c = self.confidence
        if isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c):
            raise ConstructionError(f"confidence must be a number, got {c!r}")
        if not 0.0 <= c <= 1.0:
            raise ConstructionError(f"confidence must be in [0, 1], got {c}")
        # Quantized so that encode/decode is lossless.
        _set(self, "confidence", round(float(c), FLOAT_DECIMALS))

    def to_record(self) -> dict[str, Any]:
        return {"text": self.text, "bbox": self.bbox.as_list(), "confidence": self.confidence}

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> OcrWord:
        return cls(
            text=_get(rec, "text"),
            bbox=BBox.from_record(_get(rec, "bbox")),
            confidence=rec.get("confidence", 1.0),
        )


@dataclass(frozen=True)
class OcrPage:
    image_path: str
    words: tuple[OcrWord, ...] = ()
    width: int | None = None
    height: int | None = None

    def __post_init__(self) -> None:
        _text(self.image_path, "image_path")
        _set(self, "words", tuple(self.words))
        if (self.width is None) != (self.height is None):
            raise ConstructionError("page width and height must be given together")
        if self.width is not None:
            _int(self.width, "page width", minimum=1)
            _int(self.height, "page height", minimum=1)

    @property
    def size(self) -> tuple[int, int] | None:
        if self.width is None:
            return None
        return (self.width, self.height)

    def to_record(self) -> dict[str, Any]:
        return {
            "image_path": self.image_path,
            "width": self.width,
            "height": self.height,
            "words": [w.to_record() for w in self.words],
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> OcrPage:
        return cls(
            image_path=_get(rec, "image_path"),
            words=tuple(OcrWord.from_record(w) for w in rec.get("words", ())),
            width=rec.get("width"),
            height=rec.get("height"),
        )


# --------------------------------------------------------------------------
# Reasoning chains
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ReasoningStep:
    region_index: int
    role: Role
    reasoning: str
    relation: Relation = Relation.NONE

    def __post_init__(self) -> None:
        _int(self.region_index, "region_index", minimum=0)
        _set(self, "role", _enum(Role, self.role, "role"))
        _set(self, "reasoning", _text(self.reasoning, "reasoning", allow_empty=False).strip())
        _set(self, "relation", _enum(Relation, self.relation, "relation"))

    def to_record(self) -> dict[str, Any]:
        return {
            "region_index": self.region_index,
            "role": self.role.value,
            "reasoning": self.reasoning,
            "relation": self.relation.value,
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> ReasoningStep:
        return cls(
            region_index=_get(rec, "region_index"),
            role=_get(rec, "role"),
            reasoning=_get(rec, "reasoning"),
            relation=_get(rec, "relation"),
        )


def chain_violations(
    steps: Sequence[ReasoningStep],
    branches: Sequence[Sequence[int]],
    region_count: int | None = None,
) -> list[str]:
    """List every broken chain invariant; empty means the chain is well formed."""
    problems: list[str] = []
    seen: set[int] = set()
    for i, step in enumerate(steps):
        if step.region_index in seen:
            problems.append(f"region {step.region_index} repeated")
        seen.add(step.region_index)
        if region_count is not None and step.region_index >= region_count:
            problems.append(f"step {i + 1} region {step.region_index} out of range")

    positions = [p for b in branches for p in b]
    if sorted(positions) != list(range(len(steps))):
        problems.append("branches must partition step positions")
    for b in branches:
        if not b:
            problems.append("empty branch")
        elif list(b) != sorted(b):
            problems.append("branch positions must be in step order")

    if steps:
        if steps[0].relation is not Relation.NONE:
            problems.append("initial relation must be none")
        for bi, b in enumerate(branches):
            for k, pos in enumerate(b):
                if not 0 <= pos < len(steps) or (bi == 0 and k == 0):
                    continue
                rel = steps[pos].relation
                if k == 0 and rel is not Relation.PARALLEL:
                    problems.append(f"step {pos + 1} opens a branch but relation is {rel.value}")
                elif k > 0 and rel is not Relation.SEQUENTIAL:
                    problems.append(f"step {pos + 1} continues a branch but relation is {rel.value}")
    return problems


@dataclass(frozen=True)
class ReasoningChain:
    steps: tuple[ReasoningStep, ...]
    branches: tuple[tuple[int, ...], ...]
    question_type: QuestionType = QuestionType.SEQUENTIAL
    truncated: bool = False

    def __post_init__(self) -> None:
        _set(self, "steps", tuple(self.steps))
        _set(self, "branches", tuple(tuple(b) for b in self.branches))
        _set(self, "question_type", _enum(QuestionType, self.question_type, "question_type"))
        if not self.steps:
            raise ConstructionError("a chain needs at least one step")
        problems = chain_violations(self.steps, self.branches)
        if problems:
            raise ConstructionError("invalid chain: " + "; ".join(problems))

    @property
    def region_indices(self) -> list[int]:
        return [s.region_index for s in self.steps]

    def to_record(self) -> dict[str, Any]:
        return {
            "question_type": self.question_type.value,
            "truncated": self.truncated,
            "branches": [list(b) for b in self.branches],
            "steps": [s.to_record() for s in self.steps],
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> ReasoningChain:
        return cls(
            steps=tuple(ReasoningStep.from_record(s) for s in _get(rec, "steps")),
            branches=tuple(tuple(b) for b in _get(rec, "branches")),
            question_type=_get(rec, "question_type"),
            truncated=bool(rec.get("truncated", False)),
        )


@dataclass(frozen=True)
class ChainedSample:
    """A grounded sample together with its reasoning chain and rendered text."""

    grounded: GroundedSample
    chain: ReasoningChain
    chain_text: str

    def __post_init__(self) -> None:
        problems = chain_violations(self.chain.steps, self.chain.branches, len(self.grounded.regions))
        if problems:
            raise ConstructionError(f"sample {self.sample_id}: " + "; ".join(problems))
        _text(self.chain_text, "chain_text", allow_empty=False)

    @property
    def sample_id(self) -> str:
        return self.grounded.sample_id

    def to_record(self) -> dict[str, Any]:
        rec = self.grounded.to_record()
        rec["chain"] = self.chain.to_record()
        rec["chain_text"] = self.chain_text
        return rec

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> ChainedSample:
        return cls(
            grounded=GroundedSample.from_record(rec),
            chain=ReasoningChain.from_record(_get(rec, "chain")),
            chain_text=_get(rec, "chain_text"),
        )


# --------------------------------------------------------------------------
# Predictions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    strategy: Strategy
    raw_response: str
    extracted_answer: str
    correct: bool
    region_count: int
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        _text(self.sample_id, "sample_id", allow_empty=False)
        _set(self, "strategy", _enum(Strategy, self.strategy, "strategy"))
        _text(self.raw_response, "raw_response")
        _text(self.extracted_answer, "extracted_answer")
        if not isinstance(self.correct, bool):
            raise ConstructionError("correct must be a boolean")
        _int(self.region_count, "region_count", minimum=0)
        _set(self, "flags", tuple(self.flags))

    def to_record(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "strategy": self.strategy.value,
            "raw_response": self.raw_response,
            "extracted_answer": self.extracted_answer,
            "correct": self.correct,
            "region_count": self.region_count,
            "flags": list(self.flags),
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> PredictionRecord:
        return cls(
            sample_id=_get(rec, "sample_id"),
            strategy=_get(rec, "strategy"),
            raw_response=_get(rec, "raw_response"),
            extracted_answer=_get(rec, "extracted_answer"),
            correct=_get(rec, "correct"),
            region_count=_get(rec, "region_count"),
            flags=tuple(rec.get("flags", ())),
        )


# --------------------------------------------------------------------------
# Line-record encoding
# --------------------------------------------------------------------------


def _quantize(value: Any) -> Any:
    if isinstance(value, float):
        q = round(value, FLOAT_DECIMALS)
        return 0.0 if q == 0 else q
    if isinstance(value, dict):
        return {k: _quantize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_quantize(v) for v in value]
    return value


def dumps_record(record: Mapping[str, Any]) -> str:
    """Serialize one record as a single canonical JSON line (no newline)."""
    return json.dumps(_quantize(record), ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def encode(value: Any) -> str:
    return dumps_record(value.to_record())


def decode(cls: type, line: str):
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ConstructionError(f"invalid JSON line: {exc}") from None
    return cls.from_record(rec)


def encode_lines(values: Iterable[Any]) -> str:
    return "".join(encode(v) + "\n" for v in values)
