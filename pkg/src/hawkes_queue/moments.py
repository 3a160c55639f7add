"""Transient and stationary moments of a Hawkes arrival process.

With ``k = r - E[B]``, ``L = r*lambda_star/k`` and ``D = lambda0 - L`` the
intensity mean is ``L + D e^{-kt}``. Second moments involve the second
moment of the jump law. Two conventions are offered:

``RAW_MOMENTS`` (default)
    Second moments use ``E[B^2]``, and ``Var[M_t]`` comes from integrating the
    covariance equations ``dC/dt = -kC + Var[lambda] + E[B] E[lambda]`` and
    ``dVar[M]/dt = 2C + E[lambda]`` in closed form.
``AS_WRITTEN``
    Second moments use ``E[B]^2``, and ``Var[M_t]`` together with its
    ``E[B] = r`` limit are the published expressions evaluated verbatim.

The two agree on every quantity except ``Var[M_t]`` when ``B`` is constant.

The closed forms contain removable singularities at ``k = 0`` of order up to
``k^-4``, so they are evaluated in mpmath at 60 digits and switched to the
polynomial ``E[B] = r`` forms when ``|k| < 1e-9 r``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from math import comb
from typing import Sequence

import mpmath as mp
import numpy as np

from .errors import DomainError
from .model import ArrivalParams
from .ode import OdeProblem, integrate_adaptive

__all__ = [
    "MomentConvention",
    "MomentReport",
    "mean_lambda",
    "var_lambda",
    "mean_M",
    "var_M",
    "moment_report",
    "stationary_lambda",
    "moment_ode_solve",
    "ode_moment_report",
    "CRITICAL_EPS",
]

CRITICAL_EPS = 1e-9
_DPS = 60


class MomentConvention(enum.Enum):
    AS_WRITTEN = "as-written"
    RAW_MOMENTS = "raw-moments"


def _check_t(t):
    if not (t >= 0 and math.isfinite(t)):
        raise DomainError(f"t must be finite and non-negative, got {t!r}")


def _critical(p: ArrivalParams) -> bool:
    return abs(p.r - p.jump.mean) < CRITICAL_EPS * p.r


def _b2(p: ArrivalParams, conv: MomentConvention) -> float:
    if conv is MomentConvention.RAW_MOMENTS:
        return p.jump.raw_moment(2)
    return p.jump.mean ** 2


def _dps(t) -> int:
    """Working precision; terms of order (kt)^j cancel at small t, so add digits."""
    return _DPS + (3 * int(math.ceil(-math.log10(t))) if 0 < t < 1 else 0)


def _setup(p):
    r, ls, l0, m1 = (mp.mpf(x) for x in (p.r, p.lambda_star, p.lambda0, p.jump.mean))
    k = r - m1
    L = r * ls / k
    return r, ls, l0, m1, k, L, l0 - L


def mean_lambda(p: ArrivalParams, t: float) -> float:
    _check_t(t)
    if _critical(p):
        return p.lambda0 + p.r * p.lambda_star * t
    with mp.workdps(_dps(t)):
        r, ls, l0, m1, k, L, D = _setup(p)
        return float(L + D * mp.exp(-k * t))


def var_lambda(p: ArrivalParams, t: float, conv: MomentConvention = MomentConvention.RAW_MOMENTS) -> float:
    _check_t(t)
    if t == 0:
        return 0.0
    b2 = _b2(p, conv)
    if _critical(p):
        return b2 * (p.lambda0 * t + p.r * p.lambda_star * t * t / 2)
    with mp.workdps(_dps(t)):
        r, ls, l0, m1, k, L, D = _setup(p)
        b2 = mp.mpf(b2)
        # constant terms cancel exactly; expm1 keeps precision at small t
        val = b2 / k * ((L / 2 - l0) * mp.expm1(-2 * k * t) - (L - l0) * mp.expm1(-k * t))
        return float(val)


def mean_M(p: ArrivalParams, t: float) -> float:
    _check_t(t)
    if _critical(p):
        return p.lambda0 * t + p.r * p.lambda_star * t * t / 2
    with mp.workdps(_dps(t)):
        r, ls, l0, m1, k, L, D = _setup(p)
        return float(L * t - D / k * mp.expm1(-k * t))


def _var_M_raw(p, t):
    m1, m2 = p.jump.mean, p.jump.raw_moment(2)
    if _critical(p):
        l0, rl = p.lambda0, p.r * p.lambda_star
        return (m2 * (l0 * t**3 / 3 + rl * t**4 / 12) + m1 * (l0 * t**2 + rl * t**3 / 3)
                + l0 * t + rl * t**2 / 2)
    with mp.workdps(_dps(t)):
        r, ls, l0, m1, k, L, D = _setup(p)
        m2 = mp.mpf(m2)
        e1 = -mp.expm1(-k * t)
        e2 = -mp.expm1(-2 * k * t)
        A = D / k + 2 * D * m1 / k**2 - 2 * L * m1 / k**2 - 2 * L * m2 / k**3
        Bc = m2 / k**3 * (D + L / 2)
        val = (L * t * (1 + 2 * m1 / k + m2 / k**2) + A * e1 + Bc * e2
               - 2 * D / k * (m1 + m2 / k) * t * mp.exp(-k * t))
        return float(val)


def _var_M_as_written(p, t):
    r_, ls_, l0_ = p.r, p.lambda_star, p.lambda0
    if _critical(p):
        return (l0_ * t + r_ * (l0_ + ls_ / 2) * t**2 + r_**2 / 3 * (l0_ + ls_) * t**3
                + r_**2 * ls_ / 6 * (r_ + 3 * ls_) * t**4)
    with mp.workdps(_dps(t)):
        r, ls, l0, e, k, L, D = _setup(p)
        e1 = -mp.expm1(-k * t)
        e2 = -mp.expm1(-2 * k * t)
        val = (r**3 * ls * t
               + r**2 * (l0 - r * ls / (2 * k)) * e2
               - 2 * r * e * k * (l0 - r * ls / k) * t * mp.exp(-k * t)
               + ((r**2 - e**2) * l0 - r * ls * (r**2 - e**2 + 2 * r * e) / k) * e1) / k**3
        return float(val)


def var_M(p: ArrivalParams, t: float, conv: MomentConvention = MomentConvention.RAW_MOMENTS) -> float:
    _check_t(t)
    if t == 0:
        return 0.0
    if conv is MomentConvention.RAW_MOMENTS:
        return _var_M_raw(p, t)
    return _var_M_as_written(p, t)


@dataclass(frozen=True)
class MomentReport:
    """First two moments of the intensity and the counting process at ``t``.

    ``negative_variance`` is set instead of raising when a formula returns a
    negative variance, which signals a convention mismatch for the jump law.
    """

    t: float
    mean_lambda: float
    var_lambda: float
    mean_M: float
    var_M: float
    convention: MomentConvention

    @property
    def negative_variance(self) -> bool:
        return self.var_lambda < 0 or self.var_M < 0


def moment_report(p: ArrivalParams, t: float,
                  conv: MomentConvention = MomentConvention.RAW_MOMENTS) -> MomentReport:
    return MomentReport(t, mean_lambda(p, t), var_lambda(p, t, conv), mean_M(p, t), var_M(p, t, conv), conv)


def stationary_lambda(p: ArrivalParams,
                      conv: MomentConvention = MomentConvention.RAW_MOMENTS) -> tuple[float, float]:
    """Limits of ``E[lambda_t]`` and ``Var[lambda_t]`` as ``t`` grows; requires ``E[B] < r``."""
    if not p.stable:
        raise DomainError(f"stationary limits require E[B] < r (E[B]={p.jump.mean:g}, r={p.r:g})")
    k = p.r - p.jump.mean
    return p.r * p.lambda_star / k, p.r * p.lambda_star * _b2(p, conv) / (2 * k * k)


MAX_ORDER = 4


def _jump_powers(p, conv, n_max):
    m1 = p.jump.mean
    b = [1.0]
    for q in range(1, n_max + 1):
        b.append(p.jump.raw_moment(q) if conv is MomentConvention.RAW_MOMENTS else m1**q)
    return b


def moment_ode_solve(p: ArrivalParams, n_max: int, t_grid: Sequence[float],
                     conv: MomentConvention = MomentConvention.RAW_MOMENTS,
                     rel_tol: float = 1e-12, abs_tol: float = 1e-14) -> dict[tuple[int, int], np.ndarray]:
    """Mixed moments ``E[lambda^n M^k]`` for ``1 <= n + k <= n_max`` on ``t_grid``.

    Each moment obeys a linear ODE whose right-hand side involves only
    moments of the same or lower total order, so the truncated system is
    closed. Returns a mapping ``(n, k) -> array`` aligned with ``t_grid``.
    """
    if int(n_max) != n_max or not 1 <= n_max <= MAX_ORDER:
        raise DomainError(f"n_max must be an integer in [1, {MAX_ORDER}], got {n_max!r}")
    ts = np.asarray(t_grid, dtype=float)
    if ts.ndim != 1 or ts.size == 0 or np.any(ts < 0) or np.any(np.diff(ts) < 0):
        raise DomainError("t_grid must be a non-empty, non-decreasing sequence of times >= 0")
    idx = [(n, k) for total in range(1, n_max + 1) for n in range(total, -1, -1) for k in [total - n]]
    pos = {nk: i for i, nk in enumerate(idx)}
    b = _jump_powers(p, conv, n_max)
    r, rl = p.r, p.r * p.lambda_star

    # linear system dy/dt = A y + c, assembled once
    dim = len(idx)
    A = np.zeros((dim, dim))
    c = np.zeros(dim)

    def add(row, nk, coef):
        if nk == (0, 0):
            c[row] += coef
        else:
            A[row, pos[nk]] += coef

    for row, (n, k) in enumerate(idx):
        if n > 0:
            add(row, (n - 1, k), n * rl)
            add(row, (n, k), -n * r)
        for i in range(n + 1):
            for j in range(k + 1):
                if (i, j) == (n, k):
                    continue
                add(row, (i + 1, j), comb(n, i) * comb(k, j) * b[n - i])

    y0 = np.array([p.lambda0**n if k == 0 else 0.0 for n, k in idx])
    t_end = float(ts[-1])
    sol = integrate_adaptive(OdeProblem(lambda t, y: A @ y + c, y0, (0.0, t_end)),
                             rel_tol=rel_tol, abs_tol=abs_tol, t_eval=ts)
    vals = sol(ts) if ts.size > 1 else np.atleast_2d(sol(ts[0]))
    return {nk: vals[:, pos[nk]].copy() for nk in idx}


def ode_moment_report(p: ArrivalParams, t_grid: Sequence[float],
                      conv: MomentConvention = MomentConvention.RAW_MOMENTS) -> list[MomentReport]:
    """Moment reports assembled from the second-order moment ODE system."""
    mom = moment_ode_solve(p, 2, t_grid, conv)
    out = []
    for j, t in enumerate(np.asarray(t_grid, dtype=float)):
        el, el2 = mom[(1, 0)][j], mom[(2, 0)][j]
        em, em2 = mom[(0, 1)][j], mom[(0, 2)][j]
        out.append(MomentReport(float(t), el, el2 - el * el, em, em2 - em * em, conv))
    return out
