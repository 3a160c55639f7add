"""Explicit Runge-Kutta integrators for small non-stiff initial-value problems.

Two solvers are provided: classical RK4 at a fixed step and the embedded
Dormand-Prince 5(4) pair with PI step-size control. Both return an
:class:`OdeSolution` that stores every node together with the right-hand side
evaluated there, so that values between nodes can be recovered by cubic
Hermite interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NonFiniteError, StepUnderflowError

__all__ = [
    "OdeProblem",
    "OdeSolution",
    "integrate_rk4",
    "integrate_adaptive",
    "quadrature_trapezoid",
]


@dataclass(frozen=True)
class OdeProblem:
    """``y' = rhs(t, y)`` with ``y(t_span[0]) = y0``, integrated up to ``t_span[1]``."""

    rhs: Callable[[float, np.ndarray], np.ndarray]
    y0: np.ndarray
    t_span: tuple[float, float]

    def __post_init__(self):
        y0 = np.atleast_1d(np.asarray(self.y0, dtype=float)).copy()
        y0.setflags(write=False)
        object.__setattr__(self, "y0", y0)
        t0, t1 = (float(x) for x in self.t_span)
        if not (math.isfinite(t0) and math.isfinite(t1)) or t1 < t0:
            raise DomainError(f"t_span must be finite with t_end >= t_start, got {self.t_span!r}")
        object.__setattr__(self, "t_span", (t0, t1))

    @property
    def dimension(self) -> int:
        return self.y0.size


@dataclass
class OdeSolution:
    """Nodes, states and derivatives of an integration run.

    ``stats`` holds ``steps`` (accepted), ``rejected_steps`` and
    ``max_error_estimate``. For the adaptive solver the latter is the largest
    scaled local error norm over accepted steps, which is at most one by
    construction; the fixed-step solver reports 0.
    """

    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __call__(self, t):
        """State at ``t`` by cubic Hermite interpolation between stored nodes."""
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        t0, t1 = self.times[0], self.times[-1]
        if np.any(ts < t0) or np.any(ts > t1):
            raise DomainError(f"interpolation outside [{t0}, {t1}]")
        out = np.empty((ts.size, self.states.shape[1]))
        idx = np.clip(np.searchsorted(self.times, ts, side="right") - 1, 0, len(self.times) - 2)
        for j, (tj, i) in enumerate(zip(ts, idx)):
            if len(self.times) == 1 or tj == self.times[i]:
                out[j] = self.states[i]
                continue
            if tj == self.times[i + 1]:
                out[j] = self.states[i + 1]
                continue
            h = self.times[i + 1] - self.times[i]
            x = (tj - self.times[i]) / h
            h00 = (1 + 2 * x) * (1 - x) ** 2
            h10 = x * (1 - x) ** 2
            h01 = x * x * (3 - 2 * x)
            h11 = x * x * (x - 1)
            out[j] = (h00 * self.states[i] + h10 * h * self.derivs[i]
                      + h01 * self.states[i + 1] + h11 * h * self.derivs[i + 1])
        return out[0] if scalar else out


def _eval(rhs, t, y):
    f = np.asarray(rhs(t, y), dtype=float)
    if f.shape != y.shape:
        raise DomainError(f"rhs returned shape {f.shape}, expected {y.shape}")
    return f


def _stops(t0, t1, t_eval):
    if t_eval is None:
        return np.array([t1])
    te = np.unique(np.asarray(t_eval, dtype=float))
    if te.size and (te[0] < t0 or te[-1] > t1):
        raise DomainError("t_eval must lie inside t_span")
    return np.unique(np.append(te[te > t0], t1))


def integrate_rk4(p: OdeProblem, step: float, t_eval: Sequence[float] | None = None) -> OdeSolution:
    """Classical fourth-order Runge-Kutta at a fixed step.

    The last step before each entry of ``t_eval`` (and before ``t_end``) is
    shortened so that the grid lands on it exactly. A non-finite stage value
    aborts with :class:`NonFiniteError` carrying the offending ``(t, y)``.
    """
    if not (step > 0 and math.isfinite(step)):
        raise DomainError(f"step must be positive, got {step!r}")
    t0, t1 = p.t_span
    t, y = t0, p.y0.astype(float)
    f = _eval(p.rhs, t, y)
    times, states, derivs = [t], [y.copy()], [f]
    steps = 0
    for stop in _stops(t0, t1, t_eval):
        n = max(1, int(math.ceil((stop - t) / step * (1 - 1e-12)))) if stop > t else 0
        for i in range(n):
            h = step if i < n - 1 else stop - t
            k1 = f
            k2 = _eval(p.rhs, t + h / 2, y + h / 2 * k1)
            k3 = _eval(p.rhs, t + h / 2, y + h / 2 * k2)
            k4 = _eval(p.rhs, t + h, y + h * k3)
            y_new = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t_new = stop if i == n - 1 else t + h
            if not np.all(np.isfinite(y_new)):
                raise NonFiniteError(f"non-finite state at t={t_new}", t=t, y=y.copy())
            f = _eval(p.rhs, t_new, y_new)
            if not np.all(np.isfinite(f)):
                raise NonFiniteError(f"non-finite derivative at t={t_new}", t=t_new, y=y_new)
            t, y = t_new, y_new
            times.append(t)
            states.append(y.copy())
            derivs.append(f)
            steps += 1
    if not np.all(np.isfinite(derivs[0])):
        raise NonFiniteError(f"non-finite derivative at t={t0}", t=t0, y=p.y0.copy())
    return OdeSolution(np.array(times), np.array(states), np.array(derivs),
                       {"steps": steps, "rejected_steps": 0, "max_error_estimate": 0.0})


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

# PI controller exponents (Hairer, Norsett & Wanner II.4 for order 5)
_BETA = 0.04
_ALPHA = 0.2 - 0.75 * _BETA
_SAFETY, _FAC_MIN, _FAC_MAX = 0.9, 0.2, 10.0


def _initial_step(rhs, t0, y0, f0, span, rel_tol, abs_tol):
    sc = abs_tol + rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / sc) ** 2))
    d1 = np.sqrt(np.mean((f0 / sc) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = np.asarray(rhs(t0 + h0, y0 + h0 * f0), dtype=float)
    if not np.all(np.isfinite(f1)):
        return h0 * 1e-3
    d2 = np.sqrt(np.mean(((f1 - f0) / sc) ** 2)) / h0
    dm = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
    return min(100 * h0, h1, span)


def integrate_adaptive(p: OdeProblem, rel_tol: float = 1e-8, abs_tol: float = 1e-10,
                       t_eval: Sequence[float] | None = None,
                       max_steps: int = 1_000_000) -> OdeSolution:
    """Dormand-Prince 5(4) with PI step control.

    A step is accepted when the max-norm of the local error estimate scaled
    by ``abs_tol + rel_tol * max(|y_n|, |y_{n+1}|)`` is at most one. Entries
    of ``t_eval`` are hit exactly as step endpoints. Non-finite stage values
    count as rejections; if the step falls below ``1e-14 * span`` the run is
    aborted with :class:`StepUnderflowError`, which is how finite-time
    blow-up and singularities surface.
    """
    if not (rel_tol > 0 and abs_tol > 0):
        raise DomainError("tolerances must be positive")
    t0, t1 = p.t_span
    span = t1 - t0
    y = p.y0.astype(float)
    f = _eval(p.rhs, t0, y)
    if not np.all(np.isfinite(f)):
        raise NonFiniteError(f"non-finite derivative at t={t0}", t=t0, y=y.copy())
    times, states, derivs = [t0], [y.copy()], [f]
    stats = {"steps": 0, "rejected_steps": 0, "max_error_estimate": 0.0}
    if span == 0:
        return OdeSolution(np.array(times), np.array(states), np.array(derivs), stats)

    h_min = 1e-14 * span
    # only rejections may drive the step toward h_min
    h = max(_initial_step(p.rhs, t0, y, f, span, rel_tol, abs_tol), 10 * h_min)
    err_old = 1e-4
    t = t0
    k = np.empty((7, y.size))
    for stop in _stops(t0, t1, t_eval):
        rejected_last = False
        while t < stop:
            if stats["steps"] + stats["rejected_steps"] >= max_steps:
                raise StepUnderflowError(f"step budget of {max_steps} exhausted at t={t}", t=t, y=y.copy())
            last = t + h >= stop - 1e-12 * span
            h_try = stop - t if last else h
            k[0] = f
            finite = True
            for i in range(1, 7):
                yi = y + h_try * (np.dot(_A[i], k[:i]) if i > 0 else 0.0)
                k[i] = _eval(p.rhs, t + _C[i] * h_try, yi)
                if not np.all(np.isfinite(k[i])):
                    finite = False
                    break
            if finite:
                y_new = y + h_try * (_B5 @ k)
                err_vec = h_try * (_E @ k)
                sc = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
                err = float(np.max(np.abs(err_vec) / sc))
                finite = math.isfinite(err) and np.all(np.isfinite(y_new))
            if not finite:
                stats["rejected_steps"] += 1
                h = h_try * _FAC_MIN
                rejected_last = True
                if h < h_min:
                    raise StepUnderflowError(
                        f"non-finite stages with step {h:.3e} at t={t}: singular problem", t=t, y=y.copy())
                continue
            if err <= 1.0:
                t = stop if last else t + h_try
                y = y_new
                f = k[6].copy()  # FSAL; k is overwritten by later stages
                times.append(t)
                states.append(y.copy())
                derivs.append(f)
                stats["steps"] += 1
                stats["max_error_estimate"] = max(stats["max_error_estimate"], err)
                if err == 0.0:
                    fac = _FAC_MAX
                else:
                    fac = _SAFETY * err ** (-_ALPHA) * max(err_old, 1e-4) ** _BETA
                    fac = min(_FAC_MAX, max(_FAC_MIN, fac))
                if rejected_last:
                    fac = min(fac, 1.0)
                err_old = err
                rejected_last = False
                # a step clipped to land on a stop says little about the natural step size
                h = h if last and h_try < h else h_try * fac
            else:
                stats["rejected_steps"] += 1
                fac = max(_FAC_MIN, _SAFETY * err ** (-_ALPHA))
                h = h_try * fac
                rejected_last = True
                if h < h_min:
                    raise StepUnderflowError(
                        f"step size {h:.3e} below {h_min:.3e} at t={t}: stiff or singular problem", t=t, y=y.copy())
    return OdeSolution(np.array(times), np.array(states), np.array(derivs), stats)


def quadrature_trapezoid(solution: OdeSolution, component: int) -> float:
    """Composite trapezoid rule for one state component over the stored nodes."""
    if not 0 <= component < solution.states.shape[1]:
        raise DomainError(f"component {component} out of range")
    return float(np.trapezoid(solution.states[:, component], solution.times))
