"""Two-stage training record emission.

Stage 1 records teach chain generation and are decomposed per region: one
record for every region the chain actually visits, each carrying the whole
chain as its target. Stage 2 records teach answer synthesis from the chain.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Mapping

from .chains import render_chain, validate_chain
from .core import BBox, GroundedSample, ReasoningChain
from .errors import UsageError
from .geometry import DEFAULT_TARGET, PadTransform, compute_pad_transform

# Reference fine-tuning hyperparameters, recorded for downstream trainers.
REFERENCE_HYPERPARAMETERS: dict[str, Any] = {
    "lr_stage1": 2e-5,
    "lr_stage2": 1e-5,
    "batch": 64,
    "per_device_batch": 1,
    "gradient_accumulation_steps": 64,
    "epochs": 1,
    "optimizer": "adam",
    "weight_decay": 0.0,
    "lr_scheduler": "cosine",
    "precision": "fp16",
    "image_size": DEFAULT_TARGET,
}


@dataclass(frozen=True)
class Stage1Record:
    sample_id: str
    image_path: str
    region_bbox: BBox
    region_crop_transform: PadTransform
    question: str
    description: str
    target_chain_text: str

    def __post_init__(self) -> None:
        if not self.target_chain_text.strip():
            raise UsageError("target_chain_text must be non-empty")

    def to_record(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "image_path": self.image_path,
            "region_bbox": self.region_bbox.as_list(),
            "region_crop_transform": self.region_crop_transform.to_record(),
            "question": self.question,
            "description": self.description,
            "target_chain_text": self.target_chain_text,
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> Stage1Record:
        return cls(
            sample_id=rec["sample_id"],
            image_path=rec["image_path"],
            region_bbox=BBox.from_record(rec["region_bbox"]),
            region_crop_transform=PadTransform.from_record(rec["region_crop_transform"]),
            question=rec["question"],
            description=rec["description"],
            target_chain_text=rec["target_chain_text"],
        )


@dataclass(frozen=True)
class Stage2Record:
    sample_id: str
    image_path: str
    question: str
    chain_text: str
    target_answer: str

    def __post_init__(self) -> None:
        if not self.target_answer.strip():
            raise UsageError("target_answer must be non-empty")

    def to_record(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "image_path": self.image_path,
            "question": self.question,
            "chain_text": self.chain_text,
            "target_answer": self.target_answer,
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> Stage2Record:
        return cls(**{k: rec[k] for k in ("sample_id", "image_path", "question", "chain_text", "target_answer")})


@dataclass(frozen=True)
class GoldRecord:
    sample_id: str
    answers: tuple[str, ...]

    def to_record(self) -> dict[str, Any]:
        return {"sample_id": self.sample_id, "answers": list(self.answers)}

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> GoldRecord:
        return cls(rec["sample_id"], tuple(rec["answers"]))


def decompose(gs: GroundedSample, chain: ReasoningChain, chain_text: str | None = None) -> list[Stage1Record]:
    problems = validate_chain(chain, gs)
    if problems:
        raise UsageError(f"sample {gs.sample_id}: invalid chain: {'; '.join(problems)}")
    text = chain_text if chain_text is not None else render_chain(chain, gs)
    records = []
    for step in chain.steps:
        region = gs.regions[step.region_index]
        records.append(
            Stage1Record(
                sample_id=gs.sample_id,
                image_path=gs.sample.image_path,
                region_bbox=region.bbox,
                region_crop_transform=compute_pad_transform(region.bbox.width, region.bbox.height, DEFAULT_TARGET),
                question=gs.sample.question,
                description=region.description,
                target_chain_text=text,
            )
        )
    return records


def emit_stage2(gs: GroundedSample, chain_text: str) -> Stage2Record:
    if not chain_text or not chain_text.strip():
        raise UsageError(f"sample {gs.sample_id}: empty chain text")
    if not gs.sample.answers or not gs.sample.answers[0].strip():
        raise UsageError(f"sample {gs.sample_id}: no gold answer")
    return Stage2Record(
        sample_id=gs.sample_id,
        image_path=gs.sample.image_path,
        question=gs.sample.question,
        chain_text=chain_text,
        target_answer=gs.sample.answers[0],
    )


def gold_record(gs: GroundedSample) -> GoldRecord:
    return GoldRecord(gs.sample_id, gs.sample.answers)


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the timestamp for reproducible outputs.
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def write_manifest(
    run_config: Mapping[str, Any],
    counts: Mapping[str, int] | None = None,
    *,
    stage: str = "emit",
) -> dict[str, Any]:
    """Build the manifest dict for a stage's outputs.

    The reference hyperparameters sit at the top level so trainers can read
    ``manifest["lr_stage1"]`` directly.
    """
    manifest: dict[str, Any] = {
        "stage": stage,
        "seed": run_config.get("seed"),
        "created_at": _timestamp(),
    }
    manifest.update(REFERENCE_HYPERPARAMETERS)
    manifest["counts"] = dict(counts or {})
    manifest["config"] = dict(run_config)
    return manifest
