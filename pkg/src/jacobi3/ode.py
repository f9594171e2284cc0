"""Dormand-Prince 5(4) integrator with Hermite dense output and events.

Small and self-contained; the right-hand sides here are cheap compiled
expressions, so the per-step overhead of a general solver would dominate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import StepFailure

# Butcher tableau (FSAL: row 7 equals the 5th-order weights)
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
ERR = B5 - B4
_A = np.zeros((7, 7))
for _i, _row in enumerate(A):
    _A[_i, :len(_row)] = _row

SAFETY, MIN_FACTOR, MAX_FACTOR = 0.9, 0.2, 5.0


@dataclass
class Controls:
    rtol: float = 1e-10
    atol: float = 1e-12
    h0: float | None = None
    max_steps: int = 200_000
    fixed_step: float | None = None   # if set: no error control, constant step


@dataclass
class Event:
    """Terminal event at a sign change of ``func(t, y)``.

    ``accept(t, y)`` may veto a crossing (e.g. the wrong half of a curve).
    """

    func: Callable[[float, np.ndarray], float]
    accept: Callable[[float, np.ndarray], bool] | None = None


@dataclass
class Solution:
    t: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    event_t: float | None = None
    event_y: np.ndarray | None = None
    steps: int = 0
    rejected: int = 0
    evaluations: int = 0

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    @property
    def y_final(self) -> np.ndarray:
        return self.y[-1]

    def __call__(self, times) -> np.ndarray:
        """Cubic Hermite interpolation between accepted steps."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        forward = self.t[-1] >= self.t[0]
        key = self.t if forward else -self.t
        q = times if forward else -times
        idx = np.clip(np.searchsorted(key, q, side="right") - 1, 0, len(self.t) - 2)
        out = np.empty((times.size, self.y.shape[1]))
        for n, (i, tq) in enumerate(zip(idx, times)):
            out[n] = hermite(self.t[i], self.y[i], self.dy[i], self.t[i + 1], self.y[i + 1], self.dy[i + 1], tq)
        return out


def hermite(t0, y0, f0, t1, y1, f1, t):
    h = t1 - t0
    if h == 0:
        return y0.copy()
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def _step(f, t, y, k0, h):
    K = np.empty((7, y.size))
    K[0] = k0
    for i in range(1, 7):
        K[i] = f(t + C[i] * h, y + h * (_A[i, :i] @ K[:i]))
    # row 6 of the tableau is B5, so the last stage already sits at y_new
    y_new = y + h * (B5 @ K)
    return y_new, K[6], h * (ERR @ K)


def _initial_step(f, t0, y0, f0, direction, rtol, atol):
    # Hairer-Norsett-Wanner, Solving ODEs I, II.4
    scale = atol + np.abs(y0) * rtol
    d0, d1 = np.linalg.norm(y0 / scale), np.linalg.norm(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = np.asarray(f(t0 + direction * h0, y0 + direction * h0 * f0), dtype=float)
    d2 = np.linalg.norm((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def solve(f, t0: float, y0, t_end: float, controls: Controls | None = None,
          events: Sequence[Event] = (), stops=None) -> Solution:
    """Integrate y' = f(t, y) from t0 towards t_end (either direction).

    Stops early at the first accepted event crossing; the crossing is
    located on the interpolant and then polished with real steps.
    Steps are shortened to land exactly on every time in ``stops``.
    """
    # overflowing trial steps are rejected below, not reported
    with np.errstate(over="ignore", invalid="ignore"):
        return _solve(f, t0, y0, t_end, controls, events, stops)


def _solve(f, t0, y0, t_end, controls, events, stops) -> Solution:
    ctl = controls or Controls()
    y = np.array(y0, dtype=float)
    t = float(t0)
    span = float(t_end) - t
    direction = 1.0 if span >= 0 else -1.0
    fy = np.asarray(f(t, y), dtype=float)
    nfev = 1
    ts, ys, dys = [t], [y.copy()], [fy.copy()]
    sol = Solution(np.array(ts), np.array(ys), np.array(dys))
    if span == 0:
        return sol

    if ctl.fixed_step is not None:
        n = max(1, int(round(abs(span) / ctl.fixed_step)))
        h_abs = abs(span) / n
    else:
        h_abs = ctl.h0 if ctl.h0 is not None else _initial_step(f, t, y, fy, direction, ctl.rtol, ctl.atol)
        nfev += 1
    ev_prev = [ev.func(t, y) for ev in events]
    steps = rejected = 0
    targets = sorted({float(v) for v in (stops if stops is not None else ()) if direction * (v - t) > 0}
                     | {float(t_end)}, key=lambda v: direction * v)
    ti = 0

    while direction * (t_end - t) > 0:
        if steps >= ctl.max_steps:
            raise StepFailure(f"exceeded {ctl.max_steps} steps at t = {t!r}")
        while direction * (targets[ti] - t) <= 0:
            ti += 1
        target = targets[ti]
        h_try = min(h_abs, abs(target - t))
        h = direction * h_try
        y_new, f_new, err = _step(f, t, y, fy, h)
        nfev += 6
        if ctl.fixed_step is None:
            scale = ctl.atol + np.maximum(np.abs(y), np.abs(y_new)) * ctl.rtol
            e = float(np.sqrt(np.mean((err / scale) ** 2)))
            if not np.isfinite(e) or e > 1.0:
                factor = MIN_FACTOR if not np.isfinite(e) else max(MIN_FACTOR, SAFETY * e ** -0.2)
                h_abs = h_try * factor
                rejected += 1
                if h_abs < 1e-14 * max(1.0, abs(t)):
                    raise StepFailure(f"step size underflow at t = {t!r}")
                continue
            grow = MAX_FACTOR if e == 0 else min(MAX_FACTOR, SAFETY * e ** -0.2)
        else:
            grow = 1.0
        t_new = target if abs(target - (t + h)) < 1e-13 * max(1.0, abs(target)) else t + h
        steps += 1

        hit = _first_event(f, events, ev_prev, t, y, fy, t_new, y_new, f_new)
        if hit is not None:
            te, ye, fe = hit
            ts.append(te); ys.append(ye); dys.append(fe)
            return Solution(np.array(ts), np.array(ys), np.array(dys), te, ye, steps, rejected, nfev)

        t, y, fy = t_new, y_new, f_new
        ts.append(t); ys.append(y.copy()); dys.append(fy.copy())
        ev_prev = [ev.func(t, y) for ev in events]
        # a step cut short to hit a stop does not shrink the next proposal
        h_abs = max(h_abs, h_try * grow) if h_try < h_abs else h_abs * grow

    return Solution(np.array(ts), np.array(ys), np.array(dys), None, None, steps, rejected, nfev)


def _first_event(f, events, ev_prev, t0, y0, f0, t1, y1, f1):
    best = None
    for ev, g0 in zip(events, ev_prev):
        g1 = ev.func(t1, y1)
        if g0 == 0 or np.sign(g0) == np.sign(g1):
            continue
        te = _locate(f, ev.func, t0, y0, f0, g0, t1, y1, f1, g1)
        ye = _advance(f, t0, y0, f0, te)
        if ev.accept is not None and not ev.accept(te, ye):
            continue
        if best is None or abs(te - t0) < abs(best[0] - t0):
            best = (te, ye, np.asarray(f(te, ye), dtype=float))
    return best


def _locate(f, g, t0, y0, f0, g0, t1, y1, f1, g1):
    """Root of g along the step: bisection/secant on the Hermite cubic, then
    a few secant iterations with exact sub-steps."""
    a, b, ga, gb = t0, t1, g0, g1
    for _ in range(60):
        m = b - gb * (b - a) / (gb - ga) if gb != ga else 0.5 * (a + b)
        if not (min(a, b) < m < max(a, b)):
            m = 0.5 * (a + b)
        gm = g(m, hermite(t0, y0, f0, t1, y1, f1, m))
        if gm == 0:
            a = b = m
            break
        if np.sign(gm) == np.sign(ga):
            a, ga = m, gm
        else:
            b, gb = m, gm
        if abs(b - a) < 1e-15 * max(1.0, abs(m)):
            break
    te = 0.5 * (a + b)
    # polish with exact sub-steps from t0
    tp, gp = t0, g0
    for _ in range(8):
        ge = g(te, _advance(f, t0, y0, f0, te))
        if ge == 0 or abs(ge) < 1e-15:
            break
        if ge == gp:
            break
        tn = te - ge * (te - tp) / (ge - gp)
        tn = min(max(tn, min(t0, t1)), max(t0, t1))
        tp, gp = te, ge
        if abs(tn - te) < 1e-15 * max(1.0, abs(te)):
            te = tn
            break
        te = tn
    return te


def _advance(f, t0, y0, f0, t):
    if t == t0:
        return y0.copy()
    y, _, _ = _step(f, t0, y0, f0, t - t0)
    return y
