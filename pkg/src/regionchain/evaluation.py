"""Inference strategies, answer matching, and accuracy reporting."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from .clients import ModelClient, ModelRequest, crop_ref
from .core import BBox, Dataset, GroundedSample, PredictionRecord, Strategy, make_bbox
from .errors import ConstructionError, OutOfBoundsError, ReportError, UsageError
from .geometry import crop_spec
from .grounding import BOX_PATTERN
from .prompts import TemplateId, render

ARTICLES = frozenset({"a", "an", "the"})
BBOX_PARSE_FAILED = "bbox_parse_failed"
MISSING = "—"

_NUMBER_TOKEN = re.compile(r"""^[(\["'$]*(-?\d+(?:[.,\-]\d+)*%?)[)\]"'.,;:!?]*$""")
_NUMBER = re.compile(r"^-?\d+(?:\.\d+)?%?$")
_NON_WORD = re.compile(r"[^\w\s]|_")
_MARKER = re.compile(r"answer\s+is|answer\s*:", re.IGNORECASE)
_SENTENCE_END = re.compile(r"[.!?](?=\s|$)|\n")


@dataclass(frozen=True)
class MatchConfig:
    strip_articles: bool = True
    numeric_rel_tol: float = 1e-6
    containment_max_gold_tokens: int = 3

    def __post_init__(self) -> None:
        if self.numeric_rel_tol < 0:
            raise UsageError("numeric_rel_tol must be >= 0")
        if self.containment_max_gold_tokens < 0:
            raise UsageError("containment_max_gold_tokens must be >= 0")


DEFAULT_MATCH = MatchConfig()


# --------------------------------------------------------------------------
# Matching
# --------------------------------------------------------------------------


def normalize_answer(a: str, strip_articles: bool = True) -> str:
    s = re.sub(r"(\d)\s+%", r"\1%", a.lower())
    tokens: list[str] = []
    for raw in s.split():
        m = _NUMBER_TOKEN.match(raw)
        if m:
            tokens.append(m.group(1).replace(",", ""))
        else:
            tokens.extend(_NON_WORD.sub(" ", raw).split())
    if strip_articles and len(tokens) > 1 and tokens[0] in ARTICLES:
        tokens = tokens[1:]
    return " ".join(tokens)


def _core_segment(response: str) -> str:
    markers = list(_MARKER.finditer(response))
    if markers:
        seg = response[markers[-1].end() :].lstrip(" \t:")
        end = _SENTENCE_END.search(seg)
        seg = seg[: end.start()] if end else seg
        if seg.strip():
            return seg
    lines = [ln for ln in response.splitlines() if ln.strip()]
    return lines[-1] if lines else ""


def extract_core_answer(response: str, strip_articles: bool = True) -> str:
    """Pull the final answer out of a verbose response, normalized.

    The last "answer is" / "answer:" marker wins and its sentence is kept;
    without a marker the last non-empty line is used.
    """
    return normalize_answer(_core_segment(response), strip_articles)


def _as_number(s: str) -> float | None:
    if not _NUMBER.match(s):
        return None
    return float(s.rstrip("%"))


def _contains(needle: list[str], hay: list[str]) -> bool:
    k = len(needle)
    return any(hay[i : i + k] == needle for i in range(len(hay) - k + 1))


def answers_match(prediction: str, golds: Sequence[str], cfg: MatchConfig = DEFAULT_MATCH) -> bool:
    if not golds:
        raise UsageError("answers_match needs at least one gold answer")
    candidates = {
        extract_core_answer(prediction, cfg.strip_articles),
        normalize_answer(prediction, cfg.strip_articles),
    }
    candidates.discard("")
    for gold in golds:
        g = normalize_answer(gold, cfg.strip_articles)
        if not g:
            continue
        g_num = _as_number(g)
        g_tokens = g.split()
        for c in candidates:
            if c == g:
                return True
            if g_num is not None:
                c_num = _as_number(c)
                if c_num is not None and math.isclose(c_num, g_num, rel_tol=cfg.numeric_rel_tol):
                    return True
            if len(g_tokens) <= cfg.containment_max_gold_tokens and _contains(g_tokens, c.split()):
                return True
    return False


# --------------------------------------------------------------------------
# Strategies
# --------------------------------------------------------------------------


def parse_viscot_bbox(text: str, image_size: tuple[int, int] | None) -> BBox | None:
    """First ``[a, b, c, d]`` in ``text``; values all <= 1 are image fractions."""
    m = BOX_PATTERN.search(text)
    if m is None:
        return None
    coords = [float(g) for g in m.groups()]
    normalized = all(0.0 <= c <= 1.0 for c in coords)
    try:
        if image_size is None:
            return None if normalized else make_bbox(*coords)
        w, h = image_size
        if normalized:
            coords = [coords[0] * w, coords[1] * h, coords[2] * w, coords[3] * h]
        return crop_spec(coords, w, h)
    except (ConstructionError, OutOfBoundsError):
        return None


def _regions_description(gs: GroundedSample) -> str:
    return "; ".join(f"Region {i}: {r.description} {r.bbox}" for i, r in enumerate(gs.regions))


def _content_relation(gs: GroundedSample) -> str:
    return "; ".join(f"Region {i} ({r.relation or 'none'}): {r.description}" for i, r in enumerate(gs.regions))


def _ask(model: ModelClient, prompt: str, refs: Iterable[str]) -> str:
    return model.complete(ModelRequest(prompt=prompt, image_refs=tuple(refs)))


def run_strategy(
    strategy: Strategy | str,
    model: ModelClient,
    gs: GroundedSample,
    *,
    chain_text: str | None = None,
    cfg: MatchConfig = DEFAULT_MATCH,
) -> PredictionRecord:
    strategy = Strategy(strategy)
    q = gs.sample.question
    image = gs.sample.image_path

    if strategy is Strategy.QWEN_RAR and not (chain_text and chain_text.strip()):
        raise UsageError(f"sample {gs.sample_id}: qwen_rar needs chain text")

    if strategy is Strategy.DIRECT:
        raw = _ask(model, render(TemplateId.INFER_DIRECT, {"question": q}), [image])
    elif strategy is Strategy.COCOT:
        analyses = []
        for i, r in enumerate(gs.regions):
            prompt = render(TemplateId.INFER_COCOT_STAGE1, {"description": r.description, "question": q})
            analyses.append(f"Region {i}: {_ask(model, prompt, [image, crop_ref(image, r.bbox)]).strip()}")
        prompt = render(TemplateId.INFER_COCOT_STAGE2, {"question": q, "chain_context": "\n".join(analyses)})
        raw = _ask(model, prompt, [image])
    elif strategy is Strategy.VISCOT:
        first = _ask(model, render(TemplateId.INFER_VISCOT_STAGE1, {"question": q}), [image])
        box = parse_viscot_bbox(first, gs.image_size)
        if box is None:
            return PredictionRecord(
                sample_id=gs.sample_id,
                strategy=strategy,
                raw_response=first,
                extracted_answer="",
                correct=False,
                region_count=len(gs.regions),
                flags=(BBOX_PARSE_FAILED,),
            )
        raw = _ask(model, render(TemplateId.INFER_VISCOT_STAGE2, {"question": q}), [image, crop_ref(image, box)])
    elif strategy is Strategy.MINUS_RAR:
        prompt = render(TemplateId.INFER_MINUS_RAR, {"description": _regions_description(gs), "question": q})
        raw = _ask(model, prompt, [image])
    elif strategy is Strategy.REPLACED_RAR:
        prompt = render(TemplateId.INFER_REPLACED_RAR, {"content_relation": _content_relation(gs), "question": q})
        raw = _ask(model, prompt, [image])
    else:
        prompt = render(TemplateId.INFER_QWEN_RAR, {"chain_text": chain_text, "question": q})
        raw = _ask(model, prompt, [image])

    return PredictionRecord(
        sample_id=gs.sample_id,
        strategy=strategy,
        raw_response=raw,
        extracted_answer=extract_core_answer(raw, cfg.strip_articles),
        correct=answers_match(raw, gs.sample.answers, cfg),
        region_count=len(gs.regions),
    )


def rescore(pred: PredictionRecord, golds: Sequence[str], cfg: MatchConfig = DEFAULT_MATCH) -> PredictionRecord:
    """Recompute the extracted answer and verdict under ``cfg``."""
    if BBOX_PARSE_FAILED in pred.flags:
        return pred
    return PredictionRecord(
        sample_id=pred.sample_id,
        strategy=pred.strategy,
        raw_response=pred.raw_response,
        extracted_answer=extract_core_answer(pred.raw_response, cfg.strip_articles),
        correct=answers_match(pred.raw_response, golds, cfg),
        region_count=pred.region_count,
        flags=pred.flags,
    )


# --------------------------------------------------------------------------
# Reporting
# --------------------------------------------------------------------------

SPLITS = ("single", "multi", "overall")
AVERAGE = "average"


def percent(correct: int, total: int) -> float | None:
    """Accuracy in percent rounded half-up to one decimal; None for no samples."""
    if total == 0:
        return None
    tenths = Fraction(1000 * correct, total)
    return math.floor(tenths + Fraction(1, 2)) / 10


def format_cell(value: float | None, signed: bool = False) -> str:
    if value is None:
        return MISSING
    return f"{value:+.1f}" if signed else f"{value:.1f}"


@dataclass
class AccuracyReport:
    strategies: list[str]
    datasets: list[str]
    accuracy: dict[str, dict[str, dict[str, float | None]]]
    counts: dict[str, dict[str, dict[str, int]]]
    baseline: str | None = None
    delta: dict[str, dict[str, dict[str, float | None]]] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "strategies": self.strategies,
            "datasets": self.datasets,
            "accuracy": self.accuracy,
            "counts": self.counts,
            "baseline": self.baseline,
            "delta": self.delta,
        }

    def render_text(self) -> str:
        cols = self.datasets
        header = ["Method"] + [f"{d}:{s}" for d in cols for s in SPLITS]
        rows = [[s] + [format_cell(self.accuracy[s][d][k]) for d in cols for k in SPLITS] for s in self.strategies]
        out = ["Accuracy (%)", _table(header, rows)]
        if self.baseline is not None:
            drows = [
                [f"{s} vs {self.baseline}"] + [format_cell(self.delta[s][d][k], signed=True) for d in cols for k in SPLITS]
                for s in self.strategies
                if s != self.baseline
            ]
            out += ["", f"Delta vs {self.baseline} (+ improvement, - decrease)", _table(header, drows)]
        return "\n".join(out) + "\n"


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]

    def line(cells: list[str]) -> str:
        return "  ".join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(cells)).rstrip()

    return "\n".join([line(header)] + [line(r) for r in rows])


def accuracy_report(
    preds: Sequence[PredictionRecord],
    grounded_index: Mapping[str, GroundedSample],
    baseline: Strategy | str | None = None,
) -> AccuracyReport:
    """Single/multi/overall accuracy per dataset and strategy.

    ``overall`` pools both splits (it is not the mean of the two split
    accuracies). The ``average`` column pools all datasets. Splits come from
    the grounded sample's region count.
    """
    missing = sorted({p.sample_id for p in preds if p.sample_id not in grounded_index})
    if missing:
        raise ReportError(missing)
    seen: set[tuple[str, str]] = set()
    tallies: dict[str, dict[str, dict[str, list[int]]]] = {}
    for p in preds:
        key = (p.strategy.value, p.sample_id)
        if key in seen:
            raise UsageError(f"duplicate prediction for {p.sample_id} under {p.strategy.value}")
        seen.add(key)
        gs = grounded_index[p.sample_id]
        split = "multi" if len(gs.regions) >= 2 else "single"
        by_ds = tallies.setdefault(p.strategy.value, {})
        for ds in (gs.sample.dataset.value, AVERAGE):
            cell = by_ds.setdefault(ds, {k: [0, 0] for k in SPLITS})
            for k in (split, "overall"):
                cell[k][0] += int(p.correct)
                cell[k][1] += 1

    strategies = [s.value for s in Strategy if s.value in tallies]
    present = {ds for by_ds in tallies.values() for ds in by_ds}
    datasets = [d.value for d in Dataset if d.value in present] + ([AVERAGE] if tallies else [])
    empty = {k: [0, 0] for k in SPLITS}
    accuracy = {
        s: {d: {k: percent(*tallies[s].get(d, empty)[k]) for k in SPLITS} for d in datasets} for s in strategies
    }
    counts = {s: {d: {k: tallies[s].get(d, empty)[k][1] for k in SPLITS} for d in datasets} for s in strategies}

    report = AccuracyReport(strategies, datasets, accuracy, counts)
    if baseline is not None:
        base = Strategy(baseline).value
        if base not in accuracy:
            raise UsageError(f"baseline {base} has no predictions")
        report.baseline = base
        for s in strategies:
            report.delta[s] = {
                d: {k: _delta(accuracy[s][d][k], accuracy[base][d][k]) for k in SPLITS} for d in datasets
            }
    return report


def _delta(value: float | None, base: float | None) -> float | None:
    if value is None or base is None:
        return None
    return round(value - base, 1)
