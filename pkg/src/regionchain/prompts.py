"""Prompt template registry.

Template bodies live as text assets under ``templates/`` (one file per id).
Placeholders are ``{name}`` with lowercase snake-case names; rendering is a
single literal substitution pass, so text inside bound values is never
expanded again.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Mapping

from .errors import TemplateError

TEMPLATES_VERSION = "1"

_PLACEHOLDER = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


class TemplateId(str, Enum):
    SINGLE_STEP = "single_step"
    MULTI_STEP = "multi_step"
    TRAIN_STAGE1 = "train_stage1"
    TRAIN_STAGE2 = "train_stage2"
    INFER_DIRECT = "infer_direct"
    INFER_COCOT_STAGE1 = "infer_cocot_stage1"
    INFER_COCOT_STAGE2 = "infer_cocot_stage2"
    INFER_VISCOT_STAGE1 = "infer_viscot_stage1"
    INFER_VISCOT_STAGE2 = "infer_viscot_stage2"
    INFER_MINUS_RAR = "infer_minus_rar"
    INFER_REPLACED_RAR = "infer_replaced_rar"
    INFER_QWEN_RAR = "infer_qwen_rar"
    CLASSIFY_QUESTION_TYPE = "classify_question_type"
    PROPOSE_REGIONS = "propose_regions"


@dataclass(frozen=True)
class PromptTemplate:
    id: TemplateId
    body: str
    required_placeholders: frozenset[str]

    def __post_init__(self) -> None:
        found = placeholders(self.body)
        if found != self.required_placeholders:
            raise TemplateError(
                self.id.value,
                f"template {self.id.value}: body placeholders {sorted(found)} "
                f"!= declared {sorted(self.required_placeholders)}",
            )

    @property
    def checksum(self) -> str:
        return hashlib.sha256(self.body.encode("utf-8")).hexdigest()

    def render(self, bindings: Mapping[str, object]) -> str:
        missing = sorted(self.required_placeholders - bindings.keys())
        if missing:
            raise TemplateError(missing[0], f"{self.id.value}: missing binding {missing[0]!r}")
        extra = sorted(bindings.keys() - self.required_placeholders)
        if extra:
            raise TemplateError(extra[0], f"{self.id.value}: unexpected binding {extra[0]!r}")
        return _PLACEHOLDER.sub(lambda m: str(bindings[m.group(1)]), self.body)


def placeholders(body: str) -> frozenset[str]:
    return frozenset(_PLACEHOLDER.findall(body))


def _load_body(tid: TemplateId) -> str:
    text = resources.files(__package__).joinpath("templates", f"{tid.value}.txt").read_text(encoding="utf-8")
    return text[:-1] if text.endswith("\n") else text


@lru_cache(maxsize=None)
def registry() -> dict[TemplateId, PromptTemplate]:
    out = {}
    for tid in TemplateId:
        body = _load_body(tid)
        out[tid] = PromptTemplate(tid, body, placeholders(body))
    return out


def get_template(tid: TemplateId | str) -> PromptTemplate:
    try:
        return registry()[TemplateId(tid)]
    except ValueError:
        raise TemplateError(str(tid), f"unknown template {tid!r}") from None


def render(tid: TemplateId | str, bindings: Mapping[str, object]) -> str:
    return get_template(tid).render(bindings)
