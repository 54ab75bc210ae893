"""Reading and writing line-delimited record files."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, TypeVar

from .core import dumps_record
from .errors import ConstructionError

T = TypeVar("T")


def iter_lines(path: str | os.PathLike) -> Iterator[tuple[int, dict[str, Any]]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ConstructionError(f"{path}:{lineno}: invalid JSON: {exc}") from None


def read_records(path: str | os.PathLike, cls: type[T]) -> list[T]:
    """Decode every line of ``path`` as ``cls``; errors carry file and line."""
    out = []
    for lineno, rec in iter_lines(path):
        try:
            out.append(cls.from_record(rec))  # type: ignore[attr-defined]
        except ConstructionError as exc:
            raise ConstructionError(f"{path}:{lineno}: {exc}") from None
    return out


def read_dicts(path: str | os.PathLike) -> list[dict[str, Any]]:
    return [rec for _, rec in iter_lines(path)]


def write_lines(path: str | os.PathLike, records: Iterable[Mapping[str, Any]]) -> int:
    """Write records atomically; returns the number of lines written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    n = 0
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dumps_record(rec) + "\n")
            n += 1
    os.replace(tmp, path)
    return n


def write_records(path: str | os.PathLike, values: Iterable[Any]) -> int:
    return write_lines(path, (v.to_record() for v in values))


def write_json(path: str | os.PathLike, obj: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(obj, ensure_ascii=False, indent=2) + "\n"
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
