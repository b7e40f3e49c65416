import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats
from sklearn.metrics import davies_bouldin_score, silhouette_score

from vsm_probe.errors import (
    CoincidentCentroids,
    DegenerateInput,
    InsufficientNations,
    LengthMismatch,
    NationMismatch,
    TooFewPoints,
    ZeroHumanDispersion,
    ZeroHumanReference,
)
from vsm_probe.metrics import PointSet, dbi, dimension_dispersion, mcd, pearson, silhouette, ss_h
from vsm_probe.protocol import Nation
from vsm_probe.reference_data import load_human_reference
from vsm_probe.scoring import DIMENSIONS, Dimension, VsmScore


def permutation_pvalue(x, y, n_perm, rng):
    """Two-sided permutation p-value for zero correlation, shuffling y."""
    xc = (x - x.mean()) / np.linalg.norm(x - x.mean())
    yc = (y - y.mean()) / np.linalg.norm(y - y.mean())
    observed = abs(xc @ yc)
    idx = np.argsort(rng.random((n_perm, len(y))), axis=1)
    r = yc[idx] @ xc
    return (np.sum(np.abs(r) >= observed - 1e-12) + 1) / (n_perm + 1)


def nationals(rows):
    return {n: VsmScore(*r) for n, r in zip(Nation, np.asarray(rows, dtype=float))}


def human():
    return load_human_reference().nationals


# -- pearson ------------------------------------------------------------------


def test_pearson_self_and_reversed_scale():
    x = np.array([1, 2, 5, 3, 3, 4, 1, 2.5])
    assert pearson(x, x).rho == pytest.approx(1.0, abs=1e-12)
    assert pearson(x, 6 - x).rho == pytest.approx(-1.0, abs=1e-12)
    assert pearson(x, x).p_value == 0.0


def test_pearson_matches_scipy(rng):
    for _ in range(20):
        x, y = rng.normal(size=24), rng.normal(size=24)
        ours = pearson(x, y)
        ref = stats.pearsonr(x, y)
        assert ours.rho == pytest.approx(ref.statistic, abs=1e-12)
        assert ours.p_value == pytest.approx(ref.pvalue, abs=1e-10)


def test_pearson_pvalue_vs_permutation_oracle(rng):
    x = rng.uniform(1, 5, 24)
    y = 0.2 * x + rng.uniform(1, 5, 24)
    assert pearson(x, y).p_value == pytest.approx(permutation_pvalue(x, y, 100_000, rng), abs=0.02)


def test_pearson_errors():
    with pytest.raises(LengthMismatch):
        pearson([1, 2, 3], [1, 2])
    with pytest.raises(LengthMismatch):
        pearson([1, 2], [2, 1])
    with pytest.raises(DegenerateInput):
        pearson([3, 3, 3, 3], [1, 2, 3, 4])


@given(
    arrays(np.float64, 12, elements=st.floats(1, 5)),
    arrays(np.float64, 12, elements=st.floats(1, 5)),
    st.floats(0.1, 10), st.floats(-50, 50), st.floats(0.1, 10), st.floats(-50, 50),
)
def test_pearson_affine_invariance(x, y, a, b, c, d):
    if np.ptp(x) < 1e-3 or np.ptp(y) < 1e-3:
        return
    base = pearson(x, y)
    assert pearson(a * x + b, c * y + d).rho == pytest.approx(base.rho, abs=1e-9)
    assert pearson(x, -y).rho == pytest.approx(-base.rho, abs=1e-12)
    assert 0.0 <= base.p_value <= 1.0 and -1.0 <= base.rho <= 1.0


# -- dispersion / MCD -----------------------------------------------------------


def test_human_dispersion_reproduces_published_row():
    rep = dimension_dispersion(human())
    expected = (16.613, 23.904, 15.301, 27.491, 23.337, 15.336)
    for dim, want in zip(DIMENSIONS, expected):
        assert rep.sigma[dim] == pytest.approx(want, abs=0.005)
    assert rep.distance == pytest.approx(20.330, abs=0.005)


def test_dispersion_uses_sample_std():
    rows = np.zeros((2, 6))
    rows[1, 0] = 10
    rep = dimension_dispersion({Nation.USA: VsmScore(*rows[0]), Nation.CHINA: VsmScore(*rows[1])})
    assert rep.sigma[Dimension.PDI] == pytest.approx(statistics.stdev([0, 10]), abs=1e-12)
    assert rep.sigma[Dimension.PDI] == pytest.approx(7.0710678, abs=1e-6)
    assert rep.distance == pytest.approx(7.0710678 / 6, abs=1e-6)


def test_dispersion_identical_nations():
    rep = dimension_dispersion(nationals(np.tile([1, 2, 3, 4, 5, 6], (9, 1))))
    assert all(v == 0 for v in rep.sigma.values()) and rep.distance == 0


def test_dispersion_needs_two_nations():
    with pytest.raises(InsufficientNations):
        dimension_dispersion({Nation.USA: VsmScore(0, 0, 0, 0, 0, 0)})


def test_mcd_cases():
    h = human()
    assert mcd(h, h) == 1.0
    assert mcd(nationals(np.zeros((9, 6))), h) == 0.0
    arr = np.array([h[n].as_array() for n in Nation])
    halved = arr.mean(axis=0) + 0.5 * (arr - arr.mean(axis=0))
    assert mcd(nationals(halved), h) == pytest.approx(0.5, abs=1e-12)


def test_mcd_errors():
    h = human()
    partial = dict(list(h.items())[:8])
    with pytest.raises(NationMismatch):
        mcd(partial, h)
    with pytest.raises(ZeroHumanDispersion):
        mcd(h, nationals(np.ones((9, 6))))


@given(arrays(np.float64, 6, elements=st.floats(-100, 100)), st.floats(0.01, 5))
def test_mcd_translation_and_scaling(shift, k):
    h = human()
    arr = np.array([h[n].as_array() for n in Nation])
    assert mcd(nationals(arr + shift), h) == pytest.approx(1.0, abs=1e-9)
    scaled = arr.mean(axis=0) + k * (arr - arr.mean(axis=0))
    assert mcd(nationals(scaled), h) == pytest.approx(k, rel=1e-9)


# -- DBI ------------------------------------------------------------------------


def e(x):
    v = np.zeros(6)
    v[0] = x
    return v


def test_dbi_hand_geometry():
    assert dbi([e(0), e(2)], [e(10), e(12)]) == pytest.approx(0.2, abs=1e-12)
    assert dbi([e(0)], [e(5)]) == 0.0


def test_dbi_coincident_centroids():
    with pytest.raises(CoincidentCentroids):
        dbi([e(0), e(2)], [e(1)])


def test_dbi_matches_sklearn(rng):
    for _ in range(10):
        a, b = rng.normal(0, 10, (54, 6)), rng.normal(5, 10, (54, 6))
        labels = np.r_[np.zeros(54), np.ones(54)]
        assert dbi(a, b) == pytest.approx(davies_bouldin_score(np.vstack([a, b]), labels), rel=1e-9)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_dbi_symmetry_and_translation(seed):
    r = np.random.default_rng(seed)
    a, b = r.normal(0, 20, (10, 6)), r.normal(3, 20, (12, 6))
    t = r.normal(0, 100, 6)
    assert dbi(a, b) == pytest.approx(dbi(b, a), abs=1e-12)
    assert dbi(a + t, b + t) == pytest.approx(dbi(a, b), rel=1e-9, abs=1e-9)


# -- silhouette -------------------------------------------------------------------


def test_silhouette_tight_distant_clusters(rng):
    a = rng.normal(0, 0.01, (20, 6))
    b = rng.normal(0, 0.01, (20, 6)) + e(100)
    assert silhouette(a, b) > 0.99


def test_silhouette_duplicate_set(rng):
    pts = rng.normal(0, 30, (54, 6))
    assert silhouette(pts, pts.copy()) == pytest.approx(-1 / 54, abs=1e-9)
    assert silhouette(PointSet("a", pts), PointSet("b", pts)) == pytest.approx(-0.0185185, abs=1e-6)


def test_silhouette_matches_sklearn(rng):
    for _ in range(10):
        a, b = rng.normal(0, 10, (54, 6)), rng.normal(4, 10, (40, 6))
        labels = np.r_[np.zeros(54), np.ones(40)]
        assert silhouette(a, b) == pytest.approx(silhouette_score(np.vstack([a, b]), labels), abs=1e-12)


def test_silhouette_degenerate_point_is_zero():
    # every point at the origin: a == b == 0 everywhere
    assert silhouette(np.zeros((3, 6)), np.zeros((3, 6))) == 0.0


def test_silhouette_needs_two_points():
    with pytest.raises(TooFewPoints):
        silhouette([e(0)], [e(1), e(2)])


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_silhouette_bounds_symmetry_translation(seed):
    r = np.random.default_rng(seed)
    a, b = r.normal(0, 20, (9, 6)), r.normal(r.normal(0, 20), 20, (11, 6))
    t = r.normal(0, 100, 6)
    s = silhouette(a, b)
    assert -1.0 <= s <= 1.0
    assert silhouette(b, a) == pytest.approx(s, abs=1e-12)
    assert silhouette(a + t, b + t) == pytest.approx(s, abs=1e-9)


# -- SS_h -----------------------------------------------------------------------


def two_nation(points):
    return {Nation.USA: VsmScore(*points[0]), Nation.CHINA: VsmScore(*points[1])}


def ss_h_oracle(a_nat, b_nat, h_nat):
    """Direct loop transcription of the SS_h definition."""
    nations = list(h_nat)
    n = len(nations)

    def d(p, q):
        return math.dist(p.as_array(), q.as_array())

    total = 0.0
    for own, other in ((a_nat, b_nat), (b_nat, a_nat)):
        for ni in nations:
            a_h = sum(d(h_nat[ni], h_nat[nj]) for nj in nations if nj != ni) / (n - 1)
            a = sum(d(own[ni], own[nj]) for nj in nations if nj != ni) / (n - 1)
            b = sum(d(own[ni], other[nj]) for nj in nations) / n
            total += (b - a) / a_h
    return total / (2 * n)


def test_ss_h_toy_case():
    h = two_nation([e(0), e(10)])
    a = two_nation([e(0), e(0)])
    b = two_nation([e(20), e(20)])
    assert ss_h(a, b, h) == pytest.approx(2.0, abs=1e-12)


def test_ss_h_zero_for_coincident_sets():
    same = nationals(np.tile([5, 1, 2, 3, 4, 0], (9, 1)))
    assert ss_h(same, dict(same), human()) == 0.0


def test_ss_h_matches_loop_oracle(rng):
    for _ in range(5):
        a, b = nationals(rng.normal(0, 40, (9, 6))), nationals(rng.normal(10, 40, (9, 6)))
        assert ss_h(a, b, human()) == pytest.approx(ss_h_oracle(a, b, human()), abs=1e-12)
        assert ss_h(a, b, human()) == pytest.approx(ss_h(b, a, human()), abs=1e-12)


def test_ss_h_errors():
    h = human()
    with pytest.raises(NationMismatch):
        ss_h(dict(list(h.items())[:8]), h, h)
    flat = nationals(np.zeros((9, 6)))
    with pytest.raises(ZeroHumanReference):
        ss_h(h, h, flat)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_ss_h_monotone_in_offset(seed):
    r = np.random.default_rng(seed)
    a = r.normal(0, 10, (9, 6))
    b = r.normal(0, 10, (9, 6))
    direction = b.mean(axis=0) - a.mean(axis=0)
    direction /= np.linalg.norm(direction)
    values = [ss_h(nationals(a), nationals(b + k * direction), human()) for k in (0, 25, 50, 100, 200)]
    assert all(x < y for x, y in zip(values, values[1:]))
