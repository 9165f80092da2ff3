"""Poisson threshold discrimination of the two initial spin states.

A realization is classified as T0 when at least ``N_T`` photons are counted
and as S otherwise. With equal priors the readout fidelity is
``F = 1 - (P_fn + P_fp) / 2`` where ``P_fn = P(X_T < N_T)`` and
``P_fp = P(X_S >= N_T)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

SINGLE_SHOT_FIDELITY = 0.8

# Below this mean the plain recurrence starting from exp(-lam) cannot underflow.
_LINEAR_LIMIT = 700.0


@dataclass(frozen=True)
class ThresholdPolicy:
    n_threshold: int = 1

    def __post_init__(self):
        if int(self.n_threshold) != self.n_threshold or self.n_threshold < 1:
            raise ValueError(f"photon threshold must be an integer >= 1, got {self.n_threshold}")


@dataclass(frozen=True)
class FidelityResult:
    fidelity: float
    p_false_negative: float
    p_false_positive: float
    threshold: int
    lambda_T: float
    lambda_S: float


class GridPointError(RuntimeError):
    def __init__(self, index: tuple[int, int], t_readout: float, efficiency: float, cause: Exception):
        super().__init__(f"grid point {index} (t_readout={t_readout:.6g} ns, eta={efficiency:.6g}) failed: {cause}")
        self.index = index
        self.t_readout = t_readout
        self.efficiency = efficiency


class BracketError(ValueError):
    def __init__(self, lo: float, hi: float, f_lo: float, f_hi: float):
        super().__init__(
            f"efficiency bracket [{lo:.3g}, {hi:.3g}] does not straddle F = {SINGLE_SHOT_FIDELITY}: "
            f"F(lo) = {f_lo:.6f}, F(hi) = {f_hi:.6f}"
        )
        self.f_lo = f_lo
        self.f_hi = f_hi


def _lower_sum(lam: np.ndarray, n: int) -> np.ndarray:
    # sum_{k<n} by the ratio recurrence; log domain once exp(-lam) would underflow
    out = np.empty_like(lam)
    small = lam <= _LINEAR_LIMIT
    if np.any(small):
        ls = lam[small]
        term = np.exp(-ls)
        total = term.copy()
        for k in range(1, n):
            term = term * ls / k
            total += term
        out[small] = total
    if np.any(~small):
        ll = lam[~small]
        log_lam = np.log(ll)
        log_term = -ll
        total = np.exp(log_term)
        for k in range(1, n):
            log_term = log_term + log_lam - math.log(k)
            total += np.exp(log_term)
        out[~small] = total
    return out


def _upper_sum(lam: np.ndarray, n: int) -> np.ndarray:
    # sum_{k>=n} for lam < n, where terms shrink from the first one on
    out = np.zeros_like(lam)
    pos = lam > 0
    if not np.any(pos):
        return out
    lp = lam[pos]
    term = np.exp(-lp + n * np.log(lp) - math.lgamma(n + 1))
    total = term.copy()
    k = n
    while np.any(term > 1e-18 * total):
        k += 1
        term = term * lp / k
        total += term
    out[pos] = total
    return out


def poisson_tails(lam, n: int):
    """(P(X < n), P(X >= n)) for X ~ Poisson(lam); scalar or array means.

    The smaller tail is summed directly with the ratio recurrence
    t_k = t_{k-1} * lam / k and the other is its complement, so both stay
    accurate and monotone in lam down to rounding.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < 0) or np.any(np.isnan(lam_arr)):
        raise ValueError("Poisson mean must be >= 0")
    scalar = lam_arr.ndim == 0
    lam_arr = np.atleast_1d(lam_arr)

    below = np.empty_like(lam_arr)
    above = np.empty_like(lam_arr)
    upper = lam_arr < n
    if np.any(upper):
        q = np.clip(_upper_sum(lam_arr[upper], n), 0.0, 1.0)
        above[upper] = q
        below[upper] = 1.0 - q
    if np.any(~upper):
        c = np.clip(_lower_sum(lam_arr[~upper], n), 0.0, 1.0)
        below[~upper] = c
        above[~upper] = 1.0 - c
    if scalar:
        return float(below[0]), float(above[0])
    return below, above


def poisson_cdf_below(lam, n: int):
    """P(X < n) for X ~ Poisson(lam), i.e. sum_{k=0}^{n-1} lam^k e^-lam / k!."""
    return poisson_tails(lam, n)[0]


def _policy_threshold(policy: ThresholdPolicy | int) -> int:
    return ThresholdPolicy(policy).n_threshold if isinstance(policy, (int, np.integer)) else policy.n_threshold


def readout_fidelity(lambda_T: float, lambda_S: float, policy: ThresholdPolicy | int = 1) -> FidelityResult:
    n = _policy_threshold(policy)
    p_fn = poisson_tails(lambda_T, n)[0]
    p_fp = poisson_tails(lambda_S, n)[1]
    fidelity = 1.0 - 0.5 * (p_fn + p_fp)
    return FidelityResult(fidelity, p_fn, p_fp, n, float(lambda_T), float(lambda_S))


def optimal_threshold(lambda_T: float, lambda_S: float, n_max: int = 20) -> FidelityResult:
    """Best threshold in 1..n_max by exhaustive scan; ties go to the smaller threshold."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    best = readout_fidelity(lambda_T, lambda_S, 1)
    for n in range(2, n_max + 1):
        res = readout_fidelity(lambda_T, lambda_S, n)
        if res.fidelity > best.fidelity:
            best = res
    return best


@dataclass
class FidelityMap:
    """Fidelity over a (efficiency, readout duration) grid; arrays are indexed [eta, t]."""

    t_readout: np.ndarray
    efficiency: np.ndarray
    fidelity: np.ndarray
    p_false_negative: np.ndarray
    p_false_positive: np.ndarray
    threshold: np.ndarray
    lambda_T: np.ndarray
    lambda_S: np.ndarray

    def best(self) -> tuple[float, int, int]:
        """(max F, eta index, t index); first occurrence in row-major order."""
        flat = int(np.argmax(self.fidelity))
        i, j = np.unravel_index(flat, self.fidelity.shape)
        return float(self.fidelity[i, j]), int(i), int(j)


def _thresholds(policy) -> list[int]:
    if isinstance(policy, (ThresholdPolicy, int, np.integer)):
        return [_policy_threshold(policy)]
    values = [int(n) for n in policy]
    if not values or min(values) < 1:
        raise ValueError("thresholds must be a non-empty collection of integers >= 1")
    return values


def fidelity_from_means(lambda_T: np.ndarray, lambda_S: np.ndarray, policy) -> tuple[np.ndarray, ...]:
    """Elementwise fidelity; with several thresholds, the best one per element.

    Returns (F, P_fn, P_fp, threshold) arrays shaped like the means.
    """
    lambda_T = np.asarray(lambda_T, dtype=float)
    lambda_S = np.asarray(lambda_S, dtype=float)
    best_f = best_fn = best_fp = best_n = None
    for n in _thresholds(policy):
        p_fn = poisson_tails(lambda_T, n)[0]
        p_fp = poisson_tails(lambda_S, n)[1]
        f = 1.0 - 0.5 * (p_fn + p_fp)
        if best_f is None:
            best_f, best_fn, best_fp = f, p_fn, p_fp
            best_n = np.full(np.shape(f), n, dtype=int)
            continue
        better = f > best_f
        best_f = np.where(better, f, best_f)
        best_fn = np.where(better, p_fn, best_fn)
        best_fp = np.where(better, p_fp, best_fp)
        best_n = np.where(better, n, best_n)
    return best_f, best_fn, best_fp, best_n


def fidelity_map(
    t_grid: Sequence[float],
    efficiencies: Sequence[float],
    evaluator,
    policy: ThresholdPolicy | int | Iterable[int] = 1,
) -> FidelityMap:
    """Readout fidelity at every (efficiency, duration) grid point.

    ``evaluator`` is either a ``ReadoutCurves`` sampled on ``t_grid`` (fast,
    vectorized path) or a callable ``(t_readout, efficiency) -> PhotonBudget``.
    ``policy`` is a fixed threshold or a collection of thresholds to
    maximize over.
    """
    from .protocol import ReadoutCurves

    t_grid = np.asarray(t_grid, dtype=float)
    etas = np.asarray(efficiencies, dtype=float)
    if t_grid.size == 0 or etas.size == 0:
        raise ValueError("fidelity map needs a non-empty grid")
    if np.any(etas <= 0) or np.any(etas > 1):
        raise ValueError("collection efficiencies must lie in (0, 1]")
    if np.any(t_grid <= 0):
        raise ValueError("readout durations must be > 0")

    if isinstance(evaluator, ReadoutCurves) and np.array_equal(evaluator.t_readout, t_grid):
        lam_T, lam_S = evaluator.lambdas(etas)
    else:
        lam_T = np.empty((etas.size, t_grid.size))
        lam_S = np.empty_like(lam_T)
        call: Callable = evaluator
        for i, eta in enumerate(etas):
            for j, t in enumerate(t_grid):
                try:
                    budget = call(float(t), float(eta))
                except Exception as exc:
                    raise GridPointError((i, j), float(t), float(eta), exc) from exc
                lam_T[i, j] = budget.lambda_T
                lam_S[i, j] = budget.lambda_S

    f, p_fn, p_fp, n = fidelity_from_means(lam_T, lam_S, policy)
    return FidelityMap(t_grid, etas, f, p_fn, p_fp, n, lam_T, lam_S)


def single_shot_region(fmap: FidelityMap | np.ndarray, level: float = SINGLE_SHOT_FIDELITY) -> np.ndarray:
    """Boolean mask of grid points with F strictly above the single-shot level."""
    f = fmap.fidelity if isinstance(fmap, FidelityMap) else np.asarray(fmap, dtype=float)
    return f > level


def _best_over_durations(curves, efficiency: float, thresholds) -> tuple[FidelityResult, int]:
    lam_T, lam_S = curves.lambdas(efficiency)
    f, p_fn, p_fp, n = fidelity_from_means(lam_T, lam_S, thresholds)
    j = int(np.argmax(f))
    res = FidelityResult(float(f[j]), float(p_fn[j]), float(p_fp[j]), int(n[j]), float(lam_T[j]), float(lam_S[j]))
    return res, j


def max_fidelity(curves, efficiency: float, thresholds: Iterable[int]) -> FidelityResult:
    """Best fidelity over all sampled durations and the given thresholds at one efficiency."""
    return _best_over_durations(curves, efficiency, list(thresholds))[0]


@dataclass(frozen=True)
class EfficiencyThreshold:
    eta_min: float
    eta_lower: float
    fidelity_at_min: float
    t_readout: float
    threshold: int


def min_efficiency_single_shot(
    curves,
    eta_bounds: tuple[float, float] = (1e-6, 1.0),
    thresholds: Iterable[int] = range(1, 21),
    rel_precision: float = 1e-2,
    level: float = SINGLE_SHOT_FIDELITY,
) -> EfficiencyThreshold:
    """Smallest collection efficiency whose best (duration, threshold) choice beats ``level``.

    Bisection in log(eta) until the bracket ratio is within ``rel_precision``;
    ``eta_min`` is the upper end of the final bracket, so it always passes.
    """
    thresholds = list(thresholds)
    lo, hi = eta_bounds
    if not 0 < lo < hi <= 1:
        raise ValueError("efficiency bounds must satisfy 0 < lo < hi <= 1")
    f_lo = _best_over_durations(curves, lo, thresholds)[0].fidelity
    best_hi, j = _best_over_durations(curves, hi, thresholds)
    if not (f_lo <= level < best_hi.fidelity):
        raise BracketError(lo, hi, f_lo, best_hi.fidelity)
    while hi / lo - 1.0 > rel_precision:
        mid = math.sqrt(lo * hi)
        res, j_mid = _best_over_durations(curves, mid, thresholds)
        if res.fidelity > level:
            hi, best_hi, j = mid, res, j_mid
        else:
            lo = mid
    return EfficiencyThreshold(hi, lo, best_hi.fidelity, float(curves.t_readout[j]), best_hi.threshold)
