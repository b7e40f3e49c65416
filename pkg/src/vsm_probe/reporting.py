"""Per-set reports, pairwise comparison matrices and their CSV/JSON exports."""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics
from .errors import UnknownModel, VsmProbeError
from .protocol import NATIONS
from .reference_data import HumanReference, load_human_reference
from .scoring import DIMENSIONS, ScoringConstants, identity_scores, national_aggregate, set_centroid

log = logging.getLogger(__name__)


class DiagonalPolicy(enum.Enum):
    BLANK = "blank"
    ZERO = "zero"
    SELF = "self"  # the metric of a set against itself, e.g. rho = 1


class Metric(enum.Enum):
    DBI = "dbi"
    SS = "ss"
    SS_H = "ss_h"
    PEARSON_RHO = "pearson_rho"
    PEARSON_P = "pearson_p"
    MMLU_DELTA = "mmlu_delta"

    @classmethod
    def parse(cls, value) -> "Metric":
        if isinstance(value, Metric):
            return value
        value = str(value).lower()
        if value == "pearson":
            return cls.PEARSON_RHO
        return cls(value)


_DIAGONAL = {
    Metric.DBI: DiagonalPolicy.BLANK,
    Metric.SS: DiagonalPolicy.BLANK,
    Metric.SS_H: DiagonalPolicy.BLANK,
    Metric.PEARSON_RHO: DiagonalPolicy.SELF,
    Metric.PEARSON_P: DiagonalPolicy.SELF,
    Metric.MMLU_DELTA: DiagonalPolicy.ZERO,
}


@dataclass(frozen=True)
class ComparisonMatrix:
    labels: tuple
    values: np.ndarray  # NaN marks a blank cell
    metric: Metric
    diagonal_policy: DiagonalPolicy

    def cell(self, i, j) -> float:
        if not isinstance(i, int):
            i = self.labels.index(i)
        if not isinstance(j, int):
            j = self.labels.index(j)
        return float(self.values[i, j])


@dataclass(frozen=True)
class SetReport:
    label: str
    nationals: dict
    disparity: metrics.DisparityReport
    centroid: tuple
    recognizability_rate: float
    records_sha256: str
    identities: list


def intra_set_report(exp_set, human: HumanReference | None = None,
                     c: ScoringConstants | None = None) -> SetReport:
    """National scores, cross-nation spread, MCD against humans and centroid."""
    human = human or load_human_reference()
    nationals = national_aggregate(exp_set, c)
    disparity = metrics.dimension_dispersion(nationals)
    disparity = metrics.DisparityReport(
        sigma=disparity.sigma,
        distance=disparity.distance,
        mcd=metrics.mcd(nationals, human.nationals),
    )
    return SetReport(
        label=exp_set.label,
        nationals=nationals,
        disparity=disparity,
        centroid=tuple(float(x) for x in set_centroid(exp_set)),
        recognizability_rate=float(exp_set.recognizability_rate),
        records_sha256=exp_set.records_sha256,
        identities=identity_scores(exp_set, c),
    )


def _identity_cloud(exp_set, c) -> np.ndarray:
    return np.array([s.as_array() for _, s in identity_scores(exp_set, c)])


def comparison_matrix(sets, metric, human: HumanReference | None = None,
                      c: ScoringConstants | None = None, on_error: str = "raise") -> ComparisonMatrix:
    """Symmetric matrix of ``metric`` over every pair of experiment sets.

    dbi and ss use the 54 per-identity score vectors of each set, ss_h the
    national aggregates, and the Pearson variants the 24-d set centroids.
    With ``on_error="blank"`` a failing pair is logged and left blank.
    """
    metric = Metric.parse(metric)
    if metric is Metric.MMLU_DELTA:
        raise ValueError("use mmlu_delta_matrix for MMLU deltas")
    sets = list(sets)
    if len(sets) < 2:
        raise ValueError("comparison needs at least two sets")
    labels = tuple(s.label for s in sets)

    if metric in (Metric.DBI, Metric.SS):
        data = [_identity_cloud(s, c) for s in sets]
        fn = metrics.dbi if metric is Metric.DBI else metrics.silhouette
    elif metric is Metric.SS_H:
        human = human or load_human_reference()
        data = [national_aggregate(s, c) for s in sets]

        def fn(a, b):
            return metrics.ss_h(a, b, human.nationals)
    else:
        data = [set_centroid(s) for s in sets]
        field = "rho" if metric is Metric.PEARSON_RHO else "p_value"

        def fn(a, b):
            return getattr(metrics.pearson(a, b), field)

    n = len(sets)
    values = np.full((n, n), np.nan)
    policy = _DIAGONAL[metric]
    for i in range(n):
        if policy is DiagonalPolicy.SELF:
            values[i, i] = fn(data[i], data[i])
        elif policy is DiagonalPolicy.ZERO:
            values[i, i] = 0.0
        for j in range(i + 1, n):
            try:
                v = fn(data[i], data[j])
            except VsmProbeError as exc:
                if on_error != "blank":
                    raise type(exc)(f"{labels[i]} vs {labels[j]}: {exc}") from exc
                log.warning("%s undefined for %s vs %s: %s", metric.value, labels[i], labels[j], exc)
                v = np.nan
            values[i, j] = values[j, i] = v
    return ComparisonMatrix(labels, values, metric, policy)


def mmlu_delta_matrix(mmlu: dict, models) -> ComparisonMatrix:
    models = list(models)
    unknown = [m for m in models if m not in mmlu]
    if unknown:
        raise UnknownModel(f"no MMLU score for {', '.join(unknown)}")
    scores = np.array([mmlu[m] for m in models], dtype=float)
    values = np.abs(scores[:, None] - scores[None, :])
    np.fill_diagonal(values, 0.0)
    return ComparisonMatrix(tuple(models), values, Metric.MMLU_DELTA, DiagonalPolicy.ZERO)


# --------------------------------------------------------------------------
# exports


def fmt3(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    s = f"{float(x):.3f}"
    return "0.000" if s == "-0.000" else s


def _json_float(x):
    x = float(x)
    return None if math.isnan(x) else x


def _csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def nationals_csv(nationals: dict) -> str:
    rows = [["nation"] + [d.value for d in DIMENSIONS]]
    for nation in NATIONS:
        rows.append([nation.value] + [fmt3(x) for x in nationals[nation].as_array()])
    return _csv(rows)


def identity_scores_csv(report: SetReport) -> str:
    """One 6-d score row per simulated identity, for external plotting."""
    rows = [["set", "nation", "gender", "age"] + [d.value for d in DIMENSIONS]]
    for ident, score in report.identities:
        rows.append([report.label, ident.nation.value, ident.gender.value, ident.age]
                    + [fmt3(x) for x in score.as_array()])
    return _csv(rows)


def disparity_csv(reports, human: HumanReference | None = None) -> str:
    """Dimensional std, Distance and MCD per set, with the human row last."""
    human = human or load_human_reference()
    rows = [["set"] + [d.value for d in DIMENSIONS] + ["distance", "mcd"]]
    for r in reports:
        rows.append([r.label] + [fmt3(r.disparity.sigma[d]) for d in DIMENSIONS]
                    + [fmt3(r.disparity.distance), fmt3(r.disparity.mcd)])
    h = metrics.dimension_dispersion(human.nationals)
    rows.append(["human"] + [fmt3(h.sigma[d]) for d in DIMENSIONS] + [fmt3(h.distance), fmt3(1.0)])
    return _csv(rows)


def matrix_csv(m: ComparisonMatrix) -> str:
    rows = [[m.metric.value] + list(m.labels)]
    for label, row in zip(m.labels, m.values):
        rows.append([label] + [fmt3(v) for v in row])
    return _csv(rows)


def matrix_to_dict(m: ComparisonMatrix) -> dict:
    return {
        "metric": m.metric.value,
        "diagonal_policy": m.diagonal_policy.value,
        "labels": list(m.labels),
        "values": [[_json_float(v) for v in row] for row in m.values],
    }


def report_to_dict(r: SetReport) -> dict:
    return {
        "label": r.label,
        "records_sha256": r.records_sha256,
        "recognizability_rate": r.recognizability_rate,
        "nationals": {
            n.value: {d.value: float(r.nationals[n][d]) for d in DIMENSIONS} for n in NATIONS
        },
        "sigma": {d.value: r.disparity.sigma[d] for d in DIMENSIONS},
        "distance": r.disparity.distance,
        "mcd": r.disparity.mcd,
        "centroid": list(r.centroid),
    }


def render(obj, fmt: str) -> str:
    """Text of an export; CSV uses 3-decimal reals, JSON full precision."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown export format {fmt!r}")
    if isinstance(obj, ComparisonMatrix):
        if fmt == "csv":
            return matrix_csv(obj)
        doc = matrix_to_dict(obj)
    elif isinstance(obj, SetReport):
        if fmt == "csv":
            return nationals_csv(obj.nationals)
        doc = report_to_dict(obj)
    else:
        raise TypeError(f"cannot export {type(obj).__name__}")
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def export(obj, fmt: str, path) -> Path:
    path = Path(path)
    text = render(obj, fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path
