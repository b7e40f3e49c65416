"""Bundled human VSM scores and user-supplied MMLU tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import MissingFile, SchemaError
from .protocol import NATIONS, Nation
from .scoring import DIMENSIONS, VsmScore

HUMAN_PROVENANCE = (
    "Hofstede country scores for the nine study nations "
    "(Hofstede, Hofstede & Minkov; VSM 2013 manual / hofstede-insights country tables)"
)


@dataclass(frozen=True)
class HumanReference:
    nationals: dict
    provenance: str = HUMAN_PROVENANCE


def parse_human_reference(text: str) -> HumanReference:
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r]
    expected = ["nation"] + [d.value for d in DIMENSIONS]
    if not rows or [h.strip() for h in rows[0]] != expected:
        raise SchemaError(f"human reference header must be {','.join(expected)}")
    nationals = {}
    for row in rows[1:]:
        if len(row) != len(expected):
            raise SchemaError(f"malformed human reference row {row}")
        try:
            nation = Nation.parse(row[0])
            values = [float(x) for x in row[1:]]
        except ValueError as exc:
            raise SchemaError(str(exc)) from None
        if nation in nationals:
            raise SchemaError(f"duplicate nation {nation.value}")
        nationals[nation] = VsmScore(*values)
    if set(nationals) != set(NATIONS):
        raise SchemaError("human reference must cover exactly the nine study nations")
    return HumanReference({n: nationals[n] for n in NATIONS})


def load_human_reference() -> HumanReference:
    try:
        text = resources.files("vsm_probe").joinpath("data", "human_reference.csv").read_text(encoding="utf-8")
    except FileNotFoundError:
        raise SchemaError("bundled human_reference.csv is missing") from None
    return parse_human_reference(text)


def load_mmlu(path) -> dict:
    """Read a two-column ``model,score`` CSV; a header row is optional."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingFile(f"MMLU file {path} not found") from None
    table = {}
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 2:
            raise SchemaError(f"{path}:{lineno}: expected 'model,score'")
        model, raw = row[0].strip(), row[1].strip()
        if lineno == 1 and model.lower() == "model":
            continue
        try:
            score = float(raw)
        except ValueError:
            raise SchemaError(f"{path}:{lineno}: score {raw!r} is not a number") from None
        if not model or not math.isfinite(score) or not 0.0 <= score <= 100.0:
            raise SchemaError(f"{path}:{lineno}: invalid entry {row}")
        if model in table:
            raise SchemaError(f"{path}:{lineno}: duplicate model {model!r}")
        table[model] = score
    if not table:
        raise SchemaError(f"{path} contains no MMLU scores")
    return table
