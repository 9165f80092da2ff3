"""Dormand-Prince 5(4) stepper with PI step-size control and quartic dense output.

Works on complex state vectors of an autonomous system ``dy/dt = f(y)``.
The step sequence depends only on ``t_end`` and the tolerances, never on
the requested sample times, so sampling a long run at many points gives the
same values as sampling it at one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# Butcher tableau (Dormand & Prince 1980); dense output from Shampine 1986.
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_A = [np.array(row) for row in _A]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

# PI controller constants (Hairer, Norsett & Wanner, DOPRI5 defaults).
_SAFETY = 0.9
_BETA = 0.04
_EXPO = 0.2 - 0.75 * _BETA
_FAC_MIN = 0.2
_FAC_MAX = 10.0


class StepSizeUnderflow(RuntimeError):
    """The controller drove the step below the resolvable minimum."""


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    nfev: int = 0


def dopri5(
    fun: Callable[[np.ndarray], np.ndarray],
    y0: np.ndarray,
    t_end: float,
    sample_times: np.ndarray,
    *,
    rtol: float,
    atol: float,
    max_step: float,
    first_step: float,
    on_sample: Callable[[float, np.ndarray], None] | None = None,
) -> tuple[np.ndarray, StepStats]:
    """Integrate from t=0 to ``t_end`` and return ``y`` at each sample time.

    ``sample_times`` must be sorted and lie in ``[0, t_end]``. ``on_sample``
    is called with each sampled value as soon as it is produced, which lets
    callers abort mid-run on invariant violations.
    """
    y = np.array(y0, dtype=complex)
    samples = np.empty((len(sample_times), y.size), dtype=complex)
    stats = StepStats()
    K = np.empty((7, y.size), dtype=complex)

    def emit(i: int, value: np.ndarray) -> None:
        samples[i] = value
        if on_sample is not None:
            on_sample(float(sample_times[i]), value)

    idx = 0
    while idx < len(sample_times) and sample_times[idx] <= 0.0:
        emit(idx, y)
        idx += 1

    t = 0.0
    f = fun(y)
    stats.nfev += 1
    h = min(first_step, max_step, t_end)
    err_old = 1e-4
    rejected_last = False

    while t < t_end:
        h = min(h, max_step)
        last = t + h >= t_end
        if last:
            h = t_end - t
        # the final remainder may be arbitrarily short; anything else this small is stalled
        if not last and h <= 16 * np.spacing(max(t, t_end)):
            raise StepSizeUnderflow(f"step size underflow at t={t:.6g} (h={h:.3e})")

        K[0] = f
        for s in range(1, 6):
            K[s] = fun(y + h * (_A[s] @ K[:s]))
        y_new = y + h * (_B @ K[:6])
        f_new = fun(y_new)
        K[6] = f_new
        stats.nfev += 6

        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean(np.abs(h * (_E @ K) / scale) ** 2)))
        if not np.isfinite(err):
            stats.rejected += 1
            h *= _FAC_MIN
            rejected_last = True
            continue

        if err <= 1.0:
            t_new = t_end if last else t + h
            if idx < len(sample_times) and sample_times[idx] <= t_new:
                Q = K.T @ _P
                while idx < len(sample_times) and sample_times[idx] <= t_new:
                    s_t = float(sample_times[idx])
                    if s_t == t_new:
                        emit(idx, y_new)
                    else:
                        theta = (s_t - t) / h
                        emit(idx, y + h * (Q @ (theta ** np.arange(1, 5))))
                    idx += 1
            stats.accepted += 1
            fac = err ** _EXPO / err_old ** _BETA / _SAFETY if err > 0 else 1.0 / _FAC_MAX
            fac = min(1.0 / _FAC_MIN, max(1.0 / _FAC_MAX, fac))
            h_next = h / fac
            if rejected_last:
                h_next = min(h_next, h)
            err_old = max(err, 1e-4)
            t, y, f = t_new, y_new, f_new
            h = h_next
            rejected_last = False
        else:
            stats.rejected += 1
            h = h / min(1.0 / _FAC_MIN, err ** _EXPO / _SAFETY)
            rejected_last = True

    return samples, stats
