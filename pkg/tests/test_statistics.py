import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import poisson

from qdmro.protocol import PhotonBudget, ReadoutCurves
from qdmro.statistics import (
    BracketError,
    FidelityMap,
    GridPointError,
    ThresholdPolicy,
    fidelity_map,
    min_efficiency_single_shot,
    optimal_threshold,
    poisson_cdf_below,
    poisson_tails,
    readout_fidelity,
    single_shot_region,
)


def direct_sum(lam, n):
    return math.fsum(lam**k * math.exp(-lam) / math.factorial(k) for k in range(n))


def test_cdf_examples():
    assert poisson_cdf_below(0.0, 1) == 1.0
    assert poisson_cdf_below(1.0, 1) == pytest.approx(math.exp(-1), abs=1e-15)
    assert poisson_cdf_below(5.0, 5) == pytest.approx(0.440493, abs=1e-6)
    with pytest.raises(ValueError):
        poisson_cdf_below(1.0, 0)
    with pytest.raises(ValueError):
        poisson_cdf_below(-1.0, 2)


def test_cdf_large_arguments_stay_finite():
    # far beyond where exp(-lam) underflows and k! overflows
    for lam, n in [(500.0, 200), (900.0, 950), (2000.0, 2100)]:
        got = poisson_cdf_below(lam, n)
        assert got == pytest.approx(poisson.cdf(n - 1, lam), rel=1e-9, abs=1e-300)


def test_cdf_vectorized_matches_scalar():
    lams = np.array([0.0, 0.3, 7.0, 650.0, 800.0])
    assert np.allclose(poisson_cdf_below(lams, 12), [poisson_cdf_below(x, 12) for x in lams], rtol=0, atol=0)


def test_threshold_policy_validation():
    with pytest.raises(ValueError):
        ThresholdPolicy(0)
    with pytest.raises(ValueError):
        ThresholdPolicy(1.5)


def test_fidelity_examples():
    assert readout_fidelity(3.0, 3.0, 4).fidelity == 0.5
    assert readout_fidelity(50.0, 0.0, 1).fidelity == pytest.approx(1 - math.exp(-50) / 2, abs=1e-12)
    expected = 1 - 0.5 * ((1 + 4) * math.exp(-4) + (1 - 1.5 * math.exp(-0.5)))
    res = readout_fidelity(4.0, 0.5, ThresholdPolicy(2))
    assert res.fidelity == pytest.approx(expected, abs=1e-14)
    assert res.fidelity == pytest.approx(0.90911, abs=5e-6)
    assert res.fidelity == 1 - (res.p_false_negative + res.p_false_positive) / 2


def test_optimal_threshold_examples():
    assert optimal_threshold(50.0, 0.01, 20).threshold > 1
    tie = optimal_threshold(2.0, 2.0, 10)
    assert tie.threshold == 1 and tie.fidelity == 0.5
    assert optimal_threshold(0.1, 0.0, 5).threshold == 1


@settings(max_examples=300, deadline=None)
@given(lam=st.floats(0, 50), n=st.integers(1, 100))
def test_cdf_matches_direct_sum(lam, n):
    assert abs(poisson_cdf_below(lam, n) - direct_sum(lam, n)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(lam=st.floats(0, 200), d=st.floats(1e-3, 10), n=st.integers(1, 60))
def test_cdf_monotone(lam, d, n):
    # summation rounding near 1 is a few ulp
    ulp = 4e-16
    assert 0 <= poisson_cdf_below(lam, n) <= 1
    assert poisson_cdf_below(lam + d, n) <= poisson_cdf_below(lam, n) + ulp
    assert poisson_cdf_below(lam, n + 1) >= poisson_cdf_below(lam, n) - ulp


@settings(max_examples=300, deadline=None)
@given(lam_s=st.floats(0, 100), extra=st.floats(0, 100), n=st.integers(1, 40))
def test_dominance_gives_at_least_half(lam_s, extra, n):
    assert readout_fidelity(lam_s + extra, lam_s, n).fidelity >= 0.5


@settings(max_examples=200, deadline=None)
@given(lt=st.floats(0, 60), ls=st.floats(0, 60), d=st.floats(0, 10), n=st.integers(1, 30))
def test_fidelity_monotone_in_means(lt, ls, d, n):
    base = readout_fidelity(lt, ls, n).fidelity
    assert readout_fidelity(lt + d, ls, n).fidelity >= base - 1e-15
    assert readout_fidelity(lt, ls + d, n).fidelity <= base + 1e-15


@settings(max_examples=200, deadline=None)
@given(lt=st.floats(0, 80), ls=st.floats(0, 20), n_max=st.integers(1, 25))
def test_optimal_threshold_is_exhaustive(lt, ls, n_max):
    scan = [readout_fidelity(lt, ls, n).fidelity for n in range(1, n_max + 1)]
    best = optimal_threshold(lt, ls, n_max)
    assert best.fidelity == max(scan)
    assert best.threshold == scan.index(max(scan)) + 1


def toy_curves(t, a=100.0, leak=0.002, bg=0.005):
    t = np.asarray(t, dtype=float)
    return ReadoutCurves(t, a * (1 - np.exp(-leak * t)) / leak * 0.01, 0.0005 * t, bg * t)


def test_map_fast_path_equals_callable_path():
    t = np.geomspace(1, 5000, 12)
    etas = np.geomspace(1e-3, 0.3, 7)
    curves = toy_curves(t)
    index = {float(x): j for j, x in enumerate(t)}
    fast = fidelity_map(t, etas, curves, [1, 2, 3])
    slow = fidelity_map(t, etas, lambda tt, eta: curves.budget(index[tt], eta), [1, 2, 3])
    for name in ("fidelity", "p_false_negative", "p_false_positive", "threshold", "lambda_T", "lambda_S"):
        assert np.array_equal(getattr(fast, name), getattr(slow, name)), name


@settings(max_examples=30, deadline=None)
@given(perm_seed=st.integers(0, 10**6))
def test_map_permutation_invariant(perm_seed):
    rng = np.random.default_rng(perm_seed)
    t = np.geomspace(1, 5000, 9)
    etas = np.geomspace(1e-3, 0.3, 6)
    curves = toy_curves(t)
    ref = fidelity_map(t, etas, lambda tt, eta: PhotonBudget.from_counts(tt * 0.1, tt * 1e-3, 0.0, eta), 5)
    pt, pe = rng.permutation(len(t)), rng.permutation(len(etas))
    got = fidelity_map(t[pt], etas[pe], lambda tt, eta: PhotonBudget.from_counts(tt * 0.1, tt * 1e-3, 0.0, eta), 5)
    assert np.array_equal(got.fidelity, ref.fidelity[np.ix_(pe, pt)])
    del curves


def test_map_tags_failing_point():
    def evaluator(t, eta):
        if t > 10:
            raise RuntimeError("boom")
        return PhotonBudget.from_counts(1.0, 0.0, 0.0, eta)

    with pytest.raises(GridPointError) as info:
        fidelity_map([1.0, 20.0], [0.1], evaluator)
    assert info.value.index == (0, 1)


def test_map_input_validation():
    with pytest.raises(ValueError):
        fidelity_map([], [0.1], toy_curves([1.0]))
    with pytest.raises(ValueError):
        fidelity_map([1.0], [1.5], toy_curves([1.0]))


def test_single_shot_region():
    assert not single_shot_region(np.full((3, 3), 0.5)).any()
    m = np.full((2, 2), 0.5)
    m[1, 0] = 0.81
    assert single_shot_region(m).tolist() == [[False, False], [True, False]]
    assert not single_shot_region(np.array([0.8])).any()


def test_map_is_fidelity_map_type():
    fmap = fidelity_map([1.0, 2.0], [0.5], toy_curves([1.0, 2.0]), 1)
    assert isinstance(fmap, FidelityMap)
    assert fmap.best()[1:] == (0, int(np.argmax(fmap.fidelity[0])))


def test_min_efficiency_bisection():
    t = np.geomspace(1, 5000, 40)
    curves = toy_curves(t)
    res = min_efficiency_single_shot(curves, (1e-6, 1.0), range(1, 11))
    assert res.eta_min / res.eta_lower - 1 <= 1e-2
    assert res.fidelity_at_min > 0.8
    fmap_lo = fidelity_map(t, [res.eta_lower], curves, range(1, 11))
    fmap_hi = fidelity_map(t, [res.eta_min], curves, range(1, 11))
    # consistent with the single-shot region
    assert not single_shot_region(fmap_lo).any()
    assert single_shot_region(fmap_hi).any()


def test_min_efficiency_bracket_error():
    curves = toy_curves(np.geomspace(1, 5000, 10))
    with pytest.raises(BracketError) as info:
        min_efficiency_single_shot(curves, (0.5, 1.0), range(1, 5))
    assert info.value.f_lo > 0.8


@settings(max_examples=300, deadline=None)
@given(lam=st.floats(0, 1500), n=st.integers(1, 1600))
def test_tails_complementary_and_accurate(lam, n):
    below, above = poisson_tails(lam, n)
    assert 0 <= below <= 1 and 0 <= above <= 1
    assert abs(below + above - 1) <= 2.3e-16
    assert below == pytest.approx(poisson.cdf(n - 1, lam), rel=1e-9, abs=1e-15)
    assert above == pytest.approx(poisson.sf(n - 1, lam), rel=1e-9, abs=1e-15)
