"""Evaluation point sets: JSONL files or directories of point files, content-hashed."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

from .core import LabeledPoint
from .errors import CertboundError


@dataclass(frozen=True)
class Dataset:
    ref: str
    points: tuple[LabeledPoint, ...]
    digest: str

    def by_id(self, point_id: str) -> LabeledPoint:
        for p in self.points:
            if p.id == point_id:
                return p
        raise KeyError(f"no point with id {point_id!r}")


def _parse_record(raw: dict, where: str) -> LabeledPoint:
    try:
        if "text" in raw:
            return LabeledPoint.text(str(raw["id"]), raw["text"], int(raw["label"]))
        return LabeledPoint.image(str(raw["id"]), raw["input"], raw["shape"], int(raw["label"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CertboundError(f"{where}: malformed dataset record ({exc})") from exc


def load_dataset(path: str) -> Dataset:
    """Load a JSONL dataset file, or a directory of single-record JSON files.

    The digest covers the raw bytes (for a directory: every file's name and
    bytes in sorted order), so a certificate pins the exact point population.
    """
    hasher = hashlib.sha256()
    points: list[LabeledPoint] = []
    if os.path.isdir(path):
        names = sorted(n for n in os.listdir(path) if n.endswith(".json"))
        if not names:
            raise CertboundError(f"dataset directory {path} holds no .json point files")
        for name in names:
            with open(os.path.join(path, name), "rb") as fh:
                blob = fh.read()
            hasher.update(name.encode("utf-8") + b"\x00" + blob + b"\x00")
            points.append(_parse_record(json.loads(blob), f"{path}/{name}"))
    else:
        with open(path, "rb") as fh:
            blob = fh.read()
        hasher.update(blob)
        for lineno, line in enumerate(blob.decode("utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            points.append(_parse_record(json.loads(line), f"{path}:{lineno}"))
    if not points:
        raise CertboundError(f"dataset {path} holds no points")
    ids = [p.id for p in points]
    if len(set(ids)) != len(ids):
        raise CertboundError(f"dataset {path} has duplicate point ids")
    return Dataset(ref=path, points=tuple(points), digest=hasher.hexdigest())
