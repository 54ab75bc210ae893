"""Relation-aware reasoning chain construction.

A chain is built one model call at a time. The first call picks an entry
region; every later call sees the steps so far plus the unused regions and
picks the next region together with its relation to the chain. A
``parallel`` relation opens a new branch, ``sequential`` extends the current
one. Building stops on a concluding role, when regions run out, or at the
step cap.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .clients import ModelClient, ModelRequest, crop_ref
from .core import (
    GroundedSample,
    QuestionType,
    ReasoningChain,
    ReasoningStep,
    Region,
    Relation,
    Role,
    chain_violations,
)
from .errors import ChainFailed, ConstructionError, ParseError, RangeError, UsageError
from .filtering import tokenize
from .prompts import TemplateId, render

log = logging.getLogger(__name__)

FIELDS = ("SELECTED_REGION", "ROLE", "REASONING", "RELATIONSHIP")
TERMINAL_ROLES = frozenset({Role.CONCLUSION, Role.DIRECT_ANSWER})

_LABEL = re.compile(
    r"[*\[]*\b(selected[ _]region|role|reasoning|relationship)\b[*\]]*\s*:",
    re.IGNORECASE,
)
_REGION_VALUE = re.compile(r"^(?:region\s*)?(\d+)$", re.IGNORECASE)
_STRIP_CHARS = " \t\r\n,;*\"'`[]()"


@dataclass(frozen=True)
class ChainBuilderConfig:
    max_steps: int | None = None  # None means "number of regions"
    require_exploration: bool = True

    def __post_init__(self) -> None:
        if self.max_steps is not None and self.max_steps < 1:
            raise UsageError("max_steps must be >= 1")


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------


def _clean(value: str) -> str:
    return value.strip(_STRIP_CHARS).strip()


def _token(value: str) -> str:
    return re.sub(r"[\s\-]+", "_", _clean(value).lower())


def parse_step_output(text: str, region_count: int) -> ReasoningStep:
    """Parse one ``SELECTED_REGION / ROLE / REASONING / RELATIONSHIP`` answer.

    Labels are case-insensitive and may be wrapped in brackets or asterisks;
    fields may be separated by commas or newlines. Only the first occurrence
    of each label counts, so label words inside the reasoning text are safe.
    """
    if region_count < 1:
        raise UsageError("region_count must be >= 1")
    first: dict[str, re.Match] = {}
    for m in _LABEL.finditer(text):
        name = m.group(1).upper().replace(" ", "_")
        first.setdefault(name, m)
    for name in FIELDS:
        if name not in first:
            raise ParseError(f"missing field {name}", field=name, raw=text)

    ordered = sorted(first.items(), key=lambda kv: kv[1].start())
    values: dict[str, str] = {}
    for i, (name, m) in enumerate(ordered):
        end = ordered[i + 1][1].start() if i + 1 < len(ordered) else len(text)
        values[name] = _clean(text[m.end() : end])

    m = _REGION_VALUE.match(values["SELECTED_REGION"])
    if m is None:
        raise ParseError(
            f"SELECTED_REGION is not 'Region N': {values['SELECTED_REGION']!r}", field="SELECTED_REGION", raw=text
        )
    index = int(m.group(1))
    if index >= region_count:
        raise RangeError(f"Region {index} out of range for {region_count} regions")

    try:
        role = Role(_token(values["ROLE"]))
    except ValueError:
        raise ParseError(f"unknown ROLE {values['ROLE']!r}", field="ROLE", raw=text) from None
    try:
        relation = Relation(_token(values["RELATIONSHIP"]))
    except ValueError:
        raise ParseError(
            f"unknown RELATIONSHIP {values['RELATIONSHIP']!r}", field="RELATIONSHIP", raw=text
        ) from None
    if not values["REASONING"]:
        raise ParseError("empty REASONING", field="REASONING", raw=text)
    return ReasoningStep(region_index=index, role=role, reasoning=values["REASONING"], relation=relation)


def parse_question_type(text: str) -> QuestionType | None:
    words = set(tokenize(text))
    seq, par = "sequential" in words, "parallel" in words
    if seq == par:
        return None
    return QuestionType.SEQUENTIAL if seq else QuestionType.PARALLEL


def classify_question_type(
    model: ModelClient, question: str, keywords: Sequence[str], image_ref: str | None = None
) -> QuestionType:
    if not question.strip():
        raise UsageError("question must be non-empty")
    prompt = render(TemplateId.CLASSIFY_QUESTION_TYPE, {"question": question, "keywords": ", ".join(keywords)})
    raw = model.complete(ModelRequest(prompt=prompt, image_refs=(image_ref,) if image_ref else ()))
    qtype = parse_question_type(raw)
    if qtype is None:
        log.warning("ambiguous question type %r for %r; using sequential", raw[:80], question)
        return QuestionType.SEQUENTIAL
    return qtype


# --------------------------------------------------------------------------
# Building
# --------------------------------------------------------------------------


def describe_region(index: int, region: Region) -> str:
    return f"Region {index}: {region.description} {region.bbox}"


def _previous_steps(steps: Sequence[ReasoningStep]) -> str:
    if not steps:
        return "None"
    return "".join(
        f"\n- Step {i + 1}: Region {s.region_index} ({s.role.value}, {s.relation.value}): {s.reasoning}"
        for i, s in enumerate(steps)
    )


def _role_instruction(first: bool, qtype: QuestionType, explore: bool) -> str:
    if first:
        return (
            "Select the region that best matches the question keywords as the entry point "
            "(ROLE: keyword_match)."
        )
    text = (
        "Select the next most relevant region and decide its relationship to the previous steps "
        "(sequential if it builds on the last step, parallel if it starts independent evidence). "
        "Use ROLE: conclusion only when the selected region answers the question."
    )
    if qtype is QuestionType.PARALLEL:
        text += " Prefer regions in the same row or column as earlier evidence."
    if explore:
        text += " Explore most regions before concluding."
    return text


def _with_error(prompt: str, err: Exception) -> str:
    return f"{prompt}\nYour previous output could not be used ({err}). Reply again using exactly the output format above."


def _step_prompt(
    gs: GroundedSample,
    steps: Sequence[ReasoningStep],
    available: Sequence[int],
    qtype: QuestionType,
    cfg: ChainBuilderConfig,
) -> tuple[str, tuple[str, ...]]:
    image = gs.sample.image_path
    if len(gs.regions) == 1:
        prompt = render(
            TemplateId.SINGLE_STEP,
            {
                "question": gs.sample.question,
                "keywords": ", ".join(gs.keywords),
                "region_index": 0,
                "bbox_content": f"{gs.regions[0].description} {gs.regions[0].bbox}",
            },
        )
        return prompt, (image, crop_ref(image, gs.regions[0].bbox))
    prompt = render(
        TemplateId.MULTI_STEP,
        {
            "question": gs.sample.question,
            "used_count": len(steps),
            "total_count": len(gs.regions),
            "question_type": qtype.value,
            "previous_steps": _previous_steps(steps),
            "available_regions": "".join(f"\n- {describe_region(i, gs.regions[i])}" for i in available),
            "role_instruction": _role_instruction(not steps, qtype, cfg.require_exploration),
        },
    )
    refs = (image,) + tuple(crop_ref(image, gs.regions[i].bbox) for i in available)
    return prompt, refs


def _ask_step(model: ModelClient, prompt: str, refs: tuple[str, ...], n: int, available: Sequence[int]) -> ReasoningStep:
    step = parse_step_output(model.complete(ModelRequest(prompt=prompt, image_refs=refs)), n)
    if step.region_index not in available:
        raise RangeError(f"Region {step.region_index} was already used")
    return step


def build_chain(
    model: ModelClient,
    gs: GroundedSample,
    cfg: ChainBuilderConfig = ChainBuilderConfig(),
    question_type: QuestionType | None = None,
) -> ReasoningChain:
    n = len(gs.regions)
    if n == 0:
        raise UsageError("cannot build a chain without regions")
    if question_type is None:
        question_type = (
            QuestionType.SEQUENTIAL
            if n == 1
            else classify_question_type(model, gs.sample.question, gs.keywords, gs.sample.image_path)
        )
    limit = min(n, cfg.max_steps or n)

    steps: list[ReasoningStep] = []
    branches: list[list[int]] = []
    available = list(range(n))
    truncated = False
    while len(steps) < limit and available:
        prompt, refs = _step_prompt(gs, steps, available, question_type, cfg)
        try:
            step = _ask_step(model, prompt, refs, n, available)
        except (ParseError, RangeError) as err:
            log.info("sample %s step %d: %s; retrying once", gs.sample_id, len(steps) + 1, err)
            try:
                step = _ask_step(model, _with_error(prompt, err), refs, n, available)
            except (ParseError, RangeError) as err2:
                if not steps:
                    raise ChainFailed(f"sample {gs.sample_id}: entry step unusable: {err2}") from err2
                log.warning("sample %s: truncating chain at %d steps: %s", gs.sample_id, len(steps), err2)
                truncated = True
                break

        pos = len(steps)
        if pos == 0:
            relation = Relation.NONE
            branches.append([pos])
        elif step.relation is Relation.PARALLEL:
            relation = Relation.PARALLEL
            branches.append([pos])
        else:
            relation = Relation.SEQUENTIAL
            branches[-1].append(pos)
        steps.append(ReasoningStep(step.region_index, step.role, step.reasoning, relation))
        available.remove(step.region_index)
        if step.role in TERMINAL_ROLES:
            break

    return ReasoningChain(
        steps=tuple(steps),
        branches=tuple(tuple(b) for b in branches),
        question_type=question_type,
        truncated=truncated,
    )


# --------------------------------------------------------------------------
# Rendering and validation
# --------------------------------------------------------------------------


def step_letter(position: int) -> str:
    """0 -> A, 25 -> Z, 26 -> AA (bijective base 26)."""
    out = ""
    n = position + 1
    while n:
        n, rem = divmod(n - 1, 26)
        out = chr(ord("A") + rem) + out
    return out


def render_chain(chain: ReasoningChain, gs: GroundedSample | None = None) -> str:
    blocks = []
    for branch in chain.branches:
        lines = []
        for pos in branch:
            s = chain.steps[pos]
            lines.append(f"Step {pos + 1} [Region {s.region_index}, {s.role.value}]: {s.reasoning}")
        blocks.append("\n".join(lines))
    notation = ", ".join("→".join(step_letter(p) for p in branch) for branch in chain.branches)
    return "\n\n".join(blocks) + f"\nChain: {notation}"


def validate_chain(chain: ReasoningChain | Mapping[str, Any], gs: GroundedSample) -> list[str]:
    """Return invariant violations for a chain or a raw chain record."""
    if isinstance(chain, ReasoningChain):
        return chain_violations(chain.steps, chain.branches, len(gs.regions))
    problems: list[str] = []
    steps: list[ReasoningStep] = []
    for i, rec in enumerate(chain.get("steps") or []):
        try:
            steps.append(ReasoningStep.from_record(rec))
        except ConstructionError as exc:
            problems.append(f"step {i + 1}: {exc}")
    if problems:
        return problems
    if not steps:
        return ["chain has no steps"]
    branches = chain.get("branches") or []
    return chain_violations(steps, [list(b) for b in branches], len(gs.regions))
