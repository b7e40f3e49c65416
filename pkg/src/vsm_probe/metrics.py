"""Disparity statistics between experiment sets and against human data.

Distances are Euclidean on raw 6-d VSM score vectors. Clustering metrics
are pairwise: each call compares exactly two sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .errors import (
    CoincidentCentroids,
    DegenerateInput,
    InsufficientNations,
    LengthMismatch,
    NationMismatch,
    TooFewPoints,
    ZeroHumanDispersion,
    ZeroHumanReference,
)
from .scoring import DIMENSIONS, Dimension


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    p_value: float
    n: int

    @property
    def significant(self) -> bool:
        return self.p_value < 0.05


@dataclass(frozen=True)
class DisparityReport:
    sigma: dict
    distance: float
    mcd: float | None = None


@dataclass(frozen=True)
class PointSet:
    label: str
    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)


def _points(s) -> np.ndarray:
    if isinstance(s, PointSet):
        return s.points
    if isinstance(s, dict):
        return _national_matrix(s)[1]
    rows = [p.as_array() if hasattr(p, "as_array") else p for p in s]
    return np.atleast_2d(np.asarray(rows, dtype=float))


def _national_matrix(nationals: dict, order=None) -> tuple:
    keys = list(order) if order is not None else list(nationals)
    rows = [nationals[k].as_array() if hasattr(nationals[k], "as_array") else nationals[k] for k in keys]
    return keys, np.asarray(rows, dtype=float)


def _pairwise(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    diff = p[:, None, :] - q[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _t_pvalue(rho: float, n: int) -> float:
    df = n - 2
    if abs(rho) >= 1.0:
        return 0.0
    t2 = rho * rho * df / (1.0 - rho * rho)
    # two-sided P(|T| >= |t|) for Student t with df degrees of freedom
    return float(min(1.0, max(0.0, betainc(df / 2.0, 0.5, df / (df + t2)))))


def pearson(x, y) -> CorrelationResult:
    """Sample Pearson correlation and its two-sided t-test p-value."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise LengthMismatch(f"lengths differ: {x.size} vs {y.size}")
    n = x.size
    if n < 3:
        raise LengthMismatch("pearson needs at least 3 paired values")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = math.sqrt(float(xc @ xc))
    syy = math.sqrt(float(yc @ yc))
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInput("correlation is undefined for a constant vector")
    rho = float(xc @ yc) / (sxx * syy)
    rho = max(-1.0, min(1.0, rho))
    return CorrelationResult(rho=rho, p_value=_t_pvalue(rho, n), n=n)


def dimension_dispersion(national_scores: dict) -> DisparityReport:
    """Per-dimension sample std across nations (ddof=1) and their mean."""
    if len(national_scores) < 2:
        raise InsufficientNations("dispersion needs at least two nations")
    _, arr = _national_matrix(national_scores)
    std = arr.std(axis=0, ddof=1)
    sigma = {dim: float(s) for dim, s in zip(DIMENSIONS, std)}
    return DisparityReport(sigma=sigma, distance=float(std.mean()))


def _same_nations(*maps) -> list:
    keys = set(maps[0])
    for m in maps[1:]:
        if set(m) != keys:
            raise NationMismatch("national score maps cover different nations")
    return list(maps[0])


def mcd(model_nationals: dict, human_nationals: dict) -> float:
    """Model Cultural Disparity: model cross-nation spread over the human one."""
    _same_nations(model_nationals, human_nationals)
    d_h = dimension_dispersion(human_nationals).distance
    if d_h == 0.0:
        raise ZeroHumanDispersion("human national scores have no spread")
    return dimension_dispersion(model_nationals).distance / d_h


def dbi(a, b) -> float:
    """Two-set Davies-Bouldin index: (S(a) + S(b)) / centroid distance."""
    pa, pb = _points(a), _points(b)
    if len(pa) < 1 or len(pb) < 1:
        raise TooFewPoints("dbi needs a point in each set")
    ca, cb = pa.mean(axis=0), pb.mean(axis=0)
    separation = float(np.linalg.norm(ca - cb))
    if separation == 0.0:
        raise CoincidentCentroids("set centroids coincide")
    spread_a = float(np.linalg.norm(pa - ca, axis=1).mean())
    spread_b = float(np.linalg.norm(pb - cb, axis=1).mean())
    return (spread_a + spread_b) / separation


def _silhouette_terms(own: np.ndarray, other: np.ndarray) -> np.ndarray:
    n = len(own)
    a = _pairwise(own, own).sum(axis=1) / (n - 1)
    b = _pairwise(own, other).mean(axis=1)
    denom = np.maximum(a, b)
    s = np.zeros(n)
    nz = denom > 0
    s[nz] = (b[nz] - a[nz]) / denom[nz]
    return s


def silhouette(a, b) -> float:
    """Mean silhouette over the points of both sets, each set its own cluster.

    A point whose intra- and inter-set mean distances are both zero
    contributes 0.
    """
    pa, pb = _points(a), _points(b)
    if len(pa) < 2 or len(pb) < 2:
        raise TooFewPoints("silhouette needs at least two points per set")
    terms = np.concatenate([_silhouette_terms(pa, pb), _silhouette_terms(pb, pa)])
    return float(terms.mean())


def ss_h(a_nat: dict, b_nat: dict, human_nat: dict) -> float:
    """Silhouette-style separation of two sets' national scores.

    For each nation of each set, (b - a) is normalised by that nation's
    mean distance to the other nations in the human data, where ``a`` is the
    mean distance to the other nations of its own set and ``b`` the mean
    distance to all nations of the opposite set. The result averages the
    2N terms. Values above 1 mean the two sets sit further apart than
    nations do in the human reference.
    """
    nations = _same_nations(a_nat, b_nat, human_nat)
    n = len(nations)
    if n < 2:
        raise InsufficientNations("ss_h needs at least two nations")
    _, ha = _national_matrix(human_nat, nations)
    _, pa = _national_matrix(a_nat, nations)
    _, pb = _national_matrix(b_nat, nations)

    a_h = _pairwise(ha, ha).sum(axis=1) / (n - 1)
    if np.any(a_h == 0.0):
        raise ZeroHumanReference("a human nation coincides with every other nation")

    def terms(own, other):
        intra = _pairwise(own, own).sum(axis=1) / (n - 1)
        inter = _pairwise(own, other).mean(axis=1)
        return (inter - intra) / a_h

    total = terms(pa, pb).sum() + terms(pb, pa).sum()
    return float(total / (2 * n))


__all__ = [
    "CorrelationResult",
    "DisparityReport",
    "PointSet",
    "Dimension",
    "pearson",
    "dimension_dispersion",
    "mcd",
    "dbi",
    "silhouette",
    "ss_h",
]
