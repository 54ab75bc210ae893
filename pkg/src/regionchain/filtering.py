"""Keyword extraction, per-dataset complexity rules, and train/test splitting."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Sequence

from .core import Dataset, GroundedSample, Sample
from .errors import UsageError

STOPWORDS_VERSION = "1"

# Version 1. Editing this set changes keyword counts and therefore which
# samples pass the filter; bump STOPWORDS_VERSION with any change.
STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at
    be been before being below between both but by
    can could did do does doing down during each few for from further
    had has have having he her here hers herself him himself his how
    i if in into is it its itself just me more most my myself
    no nor not now of off on once only or other our ours ourselves out over own
    same she should so some such than that the their theirs them themselves then
    there these they this those through to too under until up very
    was we were what when where which while who whom whose why will with would
    you your yours yourself yourselves
    s t don isn aren wasn weren doesn didn
    shown show shows image picture photo
    """.split()
)

_TOKEN = re.compile(r"[a-z0-9]+")
_AND_WORD = re.compile(r"\band\b", re.IGNORECASE)

MIN_SPLIT_SIZE = 500
TEST_SIZE = 500


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs, in order."""
    return _TOKEN.findall(text.lower())


def extract_keywords(question: str) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for tok in tokenize(question):
        if tok in STOPWORDS or tok in seen:
            continue
        seen.add(tok)
        out.append(tok)
    return out


def is_compound_answer(answer: str) -> bool:
    return "," in answer or "/" in answer or bool(_AND_WORD.search(answer))


@dataclass(frozen=True)
class FilterRule:
    dataset: Dataset
    min_keywords_exclusive: int
    compound_answer_enabled: bool

    def __post_init__(self) -> None:
        object.__setattr__(self, "dataset", Dataset(self.dataset))
        if self.min_keywords_exclusive < 0:
            raise UsageError("min_keywords_exclusive must be >= 0")


BUILTIN_RULES: dict[Dataset, FilterRule] = {
    r.dataset: r
    for r in (
        FilterRule(Dataset.GQA, 6, False),
        FilterRule(Dataset.DOCVQA, 4, True),
        FilterRule(Dataset.INFOVQA, 4, True),
        FilterRule(Dataset.TEXTVQA, 3, True),
        FilterRule(Dataset.VISUAL7W, 3, True),
        FilterRule(Dataset.VQAV2, 5, True),
    )
}


def rule_for(dataset: Dataset | str) -> FilterRule:
    return BUILTIN_RULES[Dataset(dataset)]


def passes_filter(sample: Sample, rule: FilterRule | None = None) -> bool:
    """Keep a sample if its question is keyword-dense or its answer is compound.

    Uses the built-in rule for the sample's dataset when ``rule`` is omitted.
    """
    if rule is None:
        rule = rule_for(sample.dataset)
    if rule.dataset is not sample.dataset:
        raise UsageError(
            f"rule for {rule.dataset.value} applied to {sample.dataset.value} sample {sample.sample_id}"
        )
    if len(extract_keywords(sample.question)) > rule.min_keywords_exclusive:
        return True
    return rule.compound_answer_enabled and any(is_compound_answer(a) for a in sample.answers)


def split_dataset(
    samples: Sequence[Sample], seed: int
) -> tuple[list[Sample], list[Sample], list[Sample]]:
    """Partition into (test, train, rest).

    500 test samples are drawn first; train takes floor(20%) of what remains.
    Each returned list keeps the input order.
    """
    n = len(samples)
    if n < MIN_SPLIT_SIZE:
        raise UsageError(f"split needs at least {MIN_SPLIT_SIZE} samples, got {n}")
    rng = random.Random(seed)
    test_idx = set(rng.sample(range(n), TEST_SIZE))
    remaining = [i for i in range(n) if i not in test_idx]
    # Integer arithmetic: floor(0.2 * k) without float error.
    n_train = len(remaining) // 5
    train_idx = set(rng.sample(remaining, n_train))
    test = [samples[i] for i in range(n) if i in test_idx]
    train = [samples[i] for i in remaining if i in train_idx]
    rest = [samples[i] for i in remaining if i not in train_idx]
    return test, train, rest


def multi_region_ratio(grounded: Sequence[GroundedSample]) -> float:
    if not grounded:
        raise UsageError("multi_region_ratio of an empty list")
    multi = sum(1 for g in grounded if len(g.regions) >= 2)
    return multi / len(grounded)
