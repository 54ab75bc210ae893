"""Multi-region grounding: model proposals reconciled against OCR content.

The procedure per sample is

1. ask the model for regions with descriptions,
2. keep each region whose OCR content already resembles its description,
   otherwise relocate it to the best-matching OCR line window,
3. if nothing usable came back, fall back to OCR boxes of question keywords.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Sequence

from .clients import ModelClient, ModelRequest, OcrClient
from .core import BBox, GroundedSample, OcrPage, OcrWord, Region, RegionSource, Sample, make_bbox
from .errors import ConstructionError, GroundingFailed, OutOfBoundsError, ParseError, UsageError
from .filtering import extract_keywords, tokenize
from .geometry import crop_spec, iou
from .prompts import TemplateId, render

log = logging.getLogger(__name__)

MAX_WINDOW_LINES = 4
DEDUP_IOU = 0.9

_NUM = r"(-?\d+(?:\.\d+)?)"
BOX_PATTERN = re.compile(r"\[\s*" + r"\s*,\s*".join([_NUM] * 4) + r"\s*\]")
_RELATION_SPLIT = re.compile(r"\|\s*relation\s*:", re.IGNORECASE)
_LABEL_PREFIX = re.compile(r"^\s*(?:[-*•]|\d+[.)])?\s*(?:region\s*\d+\s*)?[:.\-]?\s*", re.IGNORECASE)


@dataclass(frozen=True)
class GroundingConfig:
    similarity_threshold: float = 0.5
    max_regions: int = 8
    line_merge_gap_px: int = 6

    def __post_init__(self) -> None:
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise UsageError("similarity_threshold must be in [0, 1]")
        if self.max_regions < 1:
            raise UsageError("max_regions must be >= 1")
        if self.line_merge_gap_px < 0:
            raise UsageError("line_merge_gap_px must be >= 0")


DEFAULT_CONFIG = GroundingConfig()


# --------------------------------------------------------------------------
# OCR text access
# --------------------------------------------------------------------------


def group_lines(words: Sequence[OcrWord], gap: int = DEFAULT_CONFIG.line_merge_gap_px) -> list[list[OcrWord]]:
    """Group words into text lines in reading order.

    A word joins the current line when its vertical center is within ``gap``
    pixels of the line's first word; each line is then ordered left to right.
    """
    ordered = sorted(words, key=lambda w: (w.bbox.center[1], w.bbox.x1))
    lines: list[list[OcrWord]] = []
    anchor = 0.0
    for w in ordered:
        cy = w.bbox.center[1]
        if lines and cy - anchor <= gap:
            lines[-1].append(w)
        else:
            lines.append([w])
            anchor = cy
    for line in lines:
        line.sort(key=lambda w: (w.bbox.x1, w.bbox.y1))
    return lines


def _lines_text(lines: Sequence[Sequence[OcrWord]]) -> str:
    return "\n".join(" ".join(w.text for w in line) for line in lines)


def region_text(page: OcrPage, b: BBox, gap: int = DEFAULT_CONFIG.line_merge_gap_px) -> str:
    inside = [w for w in page.words if b.contains_point(*w.bbox.center)]
    return _lines_text(group_lines(inside, gap))


def text_similarity(a: str, b: str) -> float:
    """Jaccard overlap of keyword token sets."""
    ta, tb = set(extract_keywords(a)), set(extract_keywords(b))
    if not ta and not tb:
        return 1.0
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def _union(boxes: Sequence[BBox]) -> BBox:
    out = boxes[0]
    for b in boxes[1:]:
        out = out.union(b)
    return out


def search_better_region(page: OcrPage, description: str, cfg: GroundingConfig = DEFAULT_CONFIG) -> BBox | None:
    lines = group_lines(page.words, cfg.line_merge_gap_px)
    best: tuple | None = None
    best_box: BBox | None = None
    seen: set[BBox] = set()
    for start in range(len(lines)):
        for size in range(1, MAX_WINDOW_LINES + 1):
            window = lines[start : start + size]
            if len(window) < size:
                break
            box = _union([w.bbox for line in window for w in line])
            if box in seen:
                continue
            seen.add(box)
            sim = text_similarity(region_text(page, box, cfg.line_merge_gap_px), description)
            if sim < cfg.similarity_threshold:
                continue
            # Higher similarity, then smaller area, then topmost, then leftmost.
            key = (-sim, box.area, box.y1, box.x1)
            if best is None or key < best:
                best, best_box = key, box
    return best_box


def correct_region(page: OcrPage, r: Region, cfg: GroundingConfig = DEFAULT_CONFIG) -> Region:
    current = text_similarity(region_text(page, r.bbox, cfg.line_merge_gap_px), r.description)
    if current >= cfg.similarity_threshold:
        return r
    better = search_better_region(page, r.description, cfg)
    if better is None:
        if page.words:
            log.warning(
                "no OCR region matches %r (similarity %.3f); keeping proposed box %s",
                r.description, current, r.bbox,
            )
        return r
    return Region(bbox=better, description=r.description, source=RegionSource.OCR_CORRECTED, relation=r.relation)


def _norm_word(text: str) -> str:
    return "".join(tokenize(text))


def _dedupe(regions: Sequence[Region], limit: int) -> list[Region]:
    kept: list[Region] = []
    for r in regions:
        if any(iou(r.bbox, k.bbox) > DEDUP_IOU for k in kept):
            continue
        kept.append(r)
        if len(kept) == limit:
            break
    return kept


def fallback_keyword_regions(
    page: OcrPage, keywords: Sequence[str], cfg: GroundingConfig = DEFAULT_CONFIG
) -> list[Region]:
    words = [w for line in group_lines(page.words, cfg.line_merge_gap_px) for w in line]
    found = [
        Region(bbox=w.bbox, description=kw, source=RegionSource.OCR_KEYWORD_FALLBACK)
        for kw in keywords
        for w in words
        if _norm_word(w.text) == kw.lower()
    ]
    return _dedupe(found, cfg.max_regions)


# --------------------------------------------------------------------------
# Model proposals
# --------------------------------------------------------------------------


def _to_box(coords: list[float], image_size: tuple[int, int] | None) -> BBox:
    if image_size is None:
        return make_bbox(*coords)
    w, h = image_size
    if all(0.0 <= c <= 1.0 for c in coords):
        coords = [coords[0] * w, coords[1] * h, coords[2] * w, coords[3] * h]
    return crop_spec(coords, w, h)


def parse_region_proposals(
    text: str, image_size: tuple[int, int] | None = None
) -> tuple[list[Region], int]:
    """Parse ``[x1, y1, x2, y2] description | relation: ...`` lines.

    Returns the parsed regions and the number of malformed candidate lines
    (lines that mention a bracket but do not yield a region). Raises
    ParseError when candidate lines exist but none of them parse.
    """
    regions: list[Region] = []
    malformed = 0
    for line in text.splitlines():
        if "[" not in line:
            continue
        m = BOX_PATTERN.search(line)
        if m is None:
            malformed += 1
            log.warning("skipping malformed region line: %r", line)
            continue
        tail = line[m.end() :]
        parts = _RELATION_SPLIT.split(tail, maxsplit=1)
        description = parts[0].strip().lstrip(":-–").strip()
        relation = parts[1].strip() if len(parts) > 1 else ""
        if not description:
            description = _LABEL_PREFIX.sub("", line[: m.start()]).strip().rstrip(":").strip()
        try:
            box = _to_box([float(g) for g in m.groups()], image_size)
            regions.append(Region(bbox=box, description=description, relation=relation))
        except (ConstructionError, OutOfBoundsError) as exc:
            malformed += 1
            log.warning("skipping region line %r: %s", line, exc)
    if malformed and not regions:
        raise ParseError("no usable region in model output", raw=text)
    return regions, malformed


def propose_regions(
    model: ModelClient,
    image_ref: str,
    question: str,
    cfg: GroundingConfig = DEFAULT_CONFIG,
    image_size: tuple[int, int] | None = None,
) -> list[Region]:
    if not question.strip():
        raise UsageError("question must be non-empty")
    prompt = render(TemplateId.PROPOSE_REGIONS, {"question": question})
    raw = model.complete(ModelRequest(prompt=prompt, image_refs=(image_ref,)))
    regions, _ = parse_region_proposals(raw, image_size)
    return regions[: cfg.max_regions]


def ground_sample(
    model: ModelClient, ocr: OcrClient, sample: Sample, cfg: GroundingConfig = DEFAULT_CONFIG
) -> GroundedSample:
    page = ocr.ocr(sample.image_path)
    keywords = extract_keywords(sample.question)
    try:
        proposals = propose_regions(model, sample.image_path, sample.question, cfg, page.size)
    except ParseError as exc:
        log.warning("sample %s: unusable region proposals (%s)", sample.sample_id, exc)
        proposals = []
    regions = _dedupe([correct_region(page, r, cfg) for r in proposals], cfg.max_regions)
    if not regions:
        regions = fallback_keyword_regions(page, keywords, cfg)
    if not regions:
        raise GroundingFailed(f"sample {sample.sample_id}: no regions from model or OCR keywords")
    return GroundedSample(sample=sample, regions=tuple(regions), keywords=tuple(keywords), image_size=page.size)
