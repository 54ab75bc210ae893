from __future__ import annotations

import json
from pathlib import Path

import pytest

from regionchain.core import BBox, OcrPage, OcrWord

DATA = Path(__file__).parent / "data"


class PolicyModel:
    """Model stand-in driven by a Python function of the prompt."""

    def __init__(self, policy):
        self.policy = policy
        self.prompts: list[str] = []
        self.requests = []

    def complete(self, req):
        self.prompts.append(req.prompt)
        self.requests.append(req)
        return self.policy(req.prompt)


class QueueModel(PolicyModel):
    """Returns canned responses in order, ignoring the prompt."""

    def __init__(self, responses):
        it = iter(responses)
        super().__init__(lambda _prompt: next(it))


def word(text, x1, y1, x2, y2, conf=1.0):
    return OcrWord(text, BBox(x1, y1, x2, y2), conf)


def load_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


@pytest.fixture
def report_page() -> OcrPage:
    """Four text lines on a 400x300 page; the bottom-right quadrant is blank."""
    return OcrPage(
        "img/report.png",
        (
            word("Quarterly", 10, 10, 90, 30),
            word("Report", 100, 10, 160, 30),
            word("total", 10, 50, 60, 70),
            word("revenue", 70, 50, 150, 70),
            word("2020", 10, 90, 60, 110),
            word("GDP", 10, 150, 40, 170),
            word("growth", 50, 150, 110, 170),
            word("2019", 120, 150, 160, 170),
        ),
        width=400,
        height=300,
    )
