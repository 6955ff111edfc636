"""Adaptive Dormand-Prince 5(4) integrator with 4th-order dense output.

Step-size control follows the usual recipe (RMS error norm, safety 0.9,
growth clipped to [0.2, 10], no growth right after a rejection), so with
the same tolerances it tracks ``scipy.integrate.solve_ivp(method="RK45")``
closely.  It is written out here because the callers need the accepted /
rejected step counts and a hard floor on the step size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ArgumentError, IntegrationError

C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# difference between the 5th- and embedded 4th-order weights (7 stages, FSAL)
E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# Shampine's dense-output coefficients: y(t0 + s h) = y0 + h K^T P [s, s^2, s^3, s^4]
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -1 / 5


def _rms(x):
    return float(np.linalg.norm(x) / np.sqrt(x.size))


@dataclass
class OdeResult:
    t: np.ndarray
    y: np.ndarray
    n_accepted: int = 0
    n_rejected: int = 0
    n_fev: int = 0
    steps: list = field(default_factory=list)


def _initial_step(fun, t0, y0, f0, span, rtol, atol):
    # Hairer, Norsett & Wanner, sec. II.4
    scale = atol + np.abs(y0) * rtol
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = fun(t0 + h0, y0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def dopri5(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t_span: tuple[float, float],
    y0,
    t_eval,
    *,
    rtol: float = 1e-4,
    atol: float = 1e-6,
    first_step: Optional[float] = None,
    max_step: float = np.inf,
    min_step: float = 1e-10,
    on_output: Optional[Callable[[float, np.ndarray], None]] = None,
) -> OdeResult:
    """Integrate ``y' = fun(t, y)`` forward over ``t_span``.

    Values are reported at ``t_eval`` through the dense interpolant (the
    endpoints are hit exactly).  ``on_output`` is called for every reported
    point as soon as it is available.

    Raises :class:`IntegrationError` when the step size drops below
    ``min_step``; its ``partial`` attribute is the :class:`OdeResult` up to
    that point.
    """
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ArgumentError("t_span must be increasing")
    t_eval = np.asarray(t_eval, dtype=np.float64)
    if np.any(np.diff(t_eval) <= 0) or (len(t_eval) and (t_eval[0] < t0 or t_eval[-1] > t1)):
        raise ArgumentError("t_eval must be increasing and inside t_span")
    y = np.array(y0, dtype=np.float64)
    n = y.size
    res = OdeResult(t=np.empty(0), y=np.empty((0, n)))
    out_t, out_y = [], []
    k_out = 0

    def emit(t, val):
        out_t.append(t)
        out_y.append(val)
        if on_output is not None:
            on_output(t, val)

    while k_out < len(t_eval) and t_eval[k_out] == t0:
        emit(t0, y.copy())
        k_out += 1

    def counted(t, v):
        res.n_fev += 1
        return np.asarray(fun(t, v), dtype=np.float64)

    t = t0
    f = counted(t, y)
    span = t1 - t0
    h_abs = first_step if first_step is not None else _initial_step(counted, t0, y, f, span, rtol, atol)
    h_abs = min(h_abs, max_step)
    K = np.empty((7, n))

    def finish():
        res.t = np.asarray(out_t)
        res.y = np.asarray(out_y).reshape(len(out_t), n)
        return res

    while t < t1:
        rejected = False
        while True:
            if h_abs < min_step:
                finish()
                raise IntegrationError(
                    f"step size {h_abs:.3e} fell below {min_step:.1e} at t={t:.6g}", partial=res)
            t_new = min(t + h_abs, t1)
            h = t_new - t
            K[0] = f
            for s in range(1, 6):
                dy = np.dot(K[:s].T, A[s]) * h
                K[s] = counted(t + C[s] * h, y + dy)
            y_new = y + h * np.dot(K[:6].T, B)
            f_new = counted(t_new, y_new)
            K[6] = f_new
            if not np.all(np.isfinite(y_new)):
                err = np.inf
            else:
                scale = atol + np.maximum(np.abs(y), np.abs(y_new)) * rtol
                err = _rms(np.dot(K.T, E) * h / scale)
            if err < 1:
                factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, SAFETY * err ** ERROR_EXPONENT)
                if rejected:
                    factor = min(1.0, factor)
                break
            res.n_rejected += 1
            rejected = True
            if not np.isfinite(err):
                h_abs *= MIN_FACTOR
            else:
                h_abs *= max(MIN_FACTOR, SAFETY * err ** ERROR_EXPONENT)
        res.n_accepted += 1
        res.steps.append((t, h))
        Q = K.T @ P
        while k_out < len(t_eval) and t_eval[k_out] <= t_new:
            te = t_eval[k_out]
            if te == t_new:
                emit(te, y_new.copy())
            else:
                x = (te - t) / h
                emit(te, y + h * (Q @ np.array([x, x * x, x ** 3, x ** 4])))
            k_out += 1
        t, y, f = t_new, y_new, f_new
        h_abs = min(h_abs * factor, max_step)
    return finish()
