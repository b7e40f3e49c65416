"""VSM 2013 dimension scores from mean raw scores."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, IncompleteSet
from .protocol import NATIONS, identity_grid
from .questionnaire import N_QUESTIONS


class Dimension(enum.Enum):
    PDI = "PDI"
    IDV = "IDV"
    MAS = "MAS"
    UAI = "UAI"
    LTO = "LTO"
    IVR = "IVR"


DIMENSIONS = tuple(Dimension)

# (coefficient, plus question, minus question) pairs per dimension
FORMULAS = {
    Dimension.PDI: ((35, 7, 2), (25, 20, 23)),
    Dimension.IDV: ((35, 4, 1), (35, 9, 6)),
    Dimension.MAS: ((35, 5, 3), (35, 8, 10)),
    Dimension.UAI: ((40, 18, 15), (25, 21, 24)),
    Dimension.LTO: ((40, 13, 14), (25, 19, 22)),
    Dimension.IVR: ((35, 12, 11), (40, 17, 16)),
}


def _weight_matrix() -> np.ndarray:
    w = np.zeros((len(DIMENSIONS), N_QUESTIONS))
    for row, dim in enumerate(DIMENSIONS):
        for coef, plus, minus in FORMULAS[dim]:
            w[row, plus - 1] += coef
            w[row, minus - 1] -= coef
    return w


WEIGHTS = _weight_matrix()


@dataclass(frozen=True)
class ScoringConstants:
    pdi: float = 0.0
    idv: float = 0.0
    mas: float = 0.0
    uai: float = 0.0
    lto: float = 0.0
    ivr: float = 0.0

    def as_array(self) -> np.ndarray:
        arr = np.array([self.pdi, self.idv, self.mas, self.uai, self.lto, self.ivr], dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("scoring constants must be finite")
        return arr


@dataclass(frozen=True)
class VsmScore:
    pdi: float
    idv: float
    mas: float
    uai: float
    lto: float
    ivr: float

    def as_array(self) -> np.ndarray:
        return np.array([self.pdi, self.idv, self.mas, self.uai, self.lto, self.ivr], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "VsmScore":
        return cls(*(float(x) for x in arr))

    def __getitem__(self, dim: Dimension) -> float:
        return getattr(self, dim.value.lower())


def vsm_score(m, c: ScoringConstants | None = None) -> VsmScore:
    """Six dimension scores from 24 per-question mean raw scores ``m[0..23]``.

    Each dimension is two weighted differences of question means plus its
    constant, e.g. ``PDI = 35 (m7 - m2) + 25 (m20 - m23) + C_PDI``. No clamp
    is applied.
    """
    m = np.asarray(getattr(m, "scores", m), dtype=float)
    if m.shape != (N_QUESTIONS,):
        raise DomainError(f"expected {N_QUESTIONS} mean raw scores, got shape {m.shape}")
    if np.any(~np.isfinite(m)) or np.any((m < 1.0) | (m > 5.0)):
        raise DomainError("mean raw scores must lie in [1, 5]")
    c = c or ScoringConstants()
    return VsmScore.from_array(WEIGHTS @ m + c.as_array())


def _vectors(set_or_vectors) -> list:
    return list(getattr(set_or_vectors, "vectors", set_or_vectors))


def _check_complete(vectors: list) -> None:
    have = [v.identity for v in vectors]
    if len(have) != len(set(have)) or set(have) != set(identity_grid()):
        raise IncompleteSet(f"expected one vector per identity (54), got {len(vectors)}")


def national_aggregate(set_or_vectors, c: ScoringConstants | None = None) -> dict:
    """Per-nation VsmScore: average the nation's raw vectors, then score."""
    vectors = _vectors(set_or_vectors)
    _check_complete(vectors)
    out = {}
    for nation in NATIONS:
        rows = np.array([v.scores for v in vectors if v.identity.nation is nation], dtype=float)
        out[nation] = vsm_score(rows.mean(axis=0), c)
    return out


def identity_scores(set_or_vectors, c: ScoringConstants | None = None) -> list:
    """(identity, VsmScore) for every vector, in the set's order."""
    return [(v.identity, vsm_score(v.scores, c)) for v in _vectors(set_or_vectors)]


def set_centroid(set_or_vectors) -> np.ndarray:
    """Entrywise mean of the 54 response vectors (24-d)."""
    vectors = _vectors(set_or_vectors)
    _check_complete(vectors)
    return np.array([v.scores for v in vectors], dtype=float).mean(axis=0)


def nationals_array(nationals: dict, nations=NATIONS) -> np.ndarray:
    """Stack national scores into a (len(nations), 6) array."""
    return np.array([nationals[n].as_array() for n in nations])
