"""Joint transform ``zeta(t, z, u, v) = E[z^N_t exp(-u lambda_t - v mu_t)]``.

Each engine integrates a characteristic system forward in reversed time from
the query's ``(u, v)`` and assembles zeta from the terminal state. The
integral functionals that appear in the exponents are carried as extra state
components. Engines:

* :func:`zeta_hawkes_sdhawkes` Hawkes arrivals, sdHawkes service;
* :func:`zeta_m_sdhawkes` Poisson arrivals, sdHawkes service;
* :func:`zeta_hawkes_m` Hawkes arrivals, memoryless service;
* :func:`zeta_mm` Poisson arrivals, memoryless service, closed form.

The literal and corrected variants of two ambiguous ingredients can be
selected at run time through :class:`ZetaConvention` and :class:`SignVariant`.
:func:`pmf_from_pgf` recovers ``P[N_t = k]`` from real-axis evaluations of
``zeta(t, ., 0, 0)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import poisson

from .errors import DomainError, EvaluationError, IntegrationError
from .model import ArrivalParams, Constant, Exponential, JumpDist, Model, ModelKind, ServiceParams
from .ode import OdeProblem, OdeSolution, integrate_adaptive, integrate_rk4

__all__ = [
    "TransformQuery",
    "ZetaConvention",
    "SignVariant",
    "PmfResult",
    "zeta_hawkes_sdhawkes",
    "zeta_m_sdhawkes",
    "zeta_hawkes_m",
    "zeta_mm",
    "zeta_curve",
    "zeta_for_model",
    "pmf_mm",
    "pmf_mm_stationary",
    "pmf_from_pgf",
    "characteristic_problem",
    "exponential_characteristic_problem",
]

RTOL, ATOL = 1e-10, 1e-12


@dataclass(frozen=True)
class TransformQuery:
    t: float
    z: float
    u: float = 0.0
    v: float = 0.0

    def __post_init__(self):
        for name in ("t", "z", "u", "v"):
            val = getattr(self, name)
            if not isinstance(val, (int, float, np.floating, np.integer)) or not math.isfinite(val):
                raise DomainError(f"{name} must be a finite number, got {val!r}")
            object.__setattr__(self, name, float(val))
        if self.t < 0:
            raise DomainError(f"t must be >= 0, got {self.t}")
        if not 0.0 <= self.z <= 1.0:
            raise DomainError(f"z must lie in [0, 1], got {self.z}")
        if self.u < 0 or self.v < 0:
            raise DomainError(f"u and v must be >= 0, got u={self.u}, v={self.v}")


class ZetaConvention(enum.Enum):
    """Which value of the ``u``-characteristic multiplies ``lambda0`` in the prefactor."""

    PREFACTOR_AT_ZERO = "at-zero"
    PREFACTOR_AT_T = "at-t"


class SignVariant(enum.Enum):
    """Integrand of the Poisson-arrival exponent: ``z(x) + 1`` or ``z(x) - 1``."""

    PLUS_ONE = "plus-one"
    MINUS_ONE = "minus-one"


DEFAULT_CONVENTION = ZetaConvention.PREFACTOR_AT_T
DEFAULT_SIGN = SignVariant.MINUS_ONE


def _transform_ext(d: JumpDist):
    """``x -> E[exp(-xX)]`` extended to negative ``x``; ``nan`` past the pole."""
    if isinstance(d, Exponential):
        rate = d.rate

        def f(x):
            return rate / (rate + x) if x > -rate else math.nan
        return f
    c = d.value
    if c == 0.0:
        return lambda x: 1.0
    return lambda x: math.exp(-x * c)


def _solve(problem: OdeProblem, ts, rel_tol, abs_tol, solver="adaptive", step=1e-3) -> OdeSolution:
    try:
        if solver == "rk4":
            return integrate_rk4(problem, step, t_eval=ts)
        return integrate_adaptive(problem, rel_tol=rel_tol, abs_tol=abs_tol, t_eval=ts)
    except IntegrationError as exc:
        raise EvaluationError(
            f"characteristic system could not be integrated: {exc} "
            f"(state {np.array2string(np.asarray(exc.y), precision=4) if exc.y is not None else '?'} at t={exc.t})",
            state=exc.y) from None


def _times(ts):
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if ts.ndim != 1 or np.any(ts < 0) or np.any(~np.isfinite(ts)):
        raise DomainError("times must be finite and >= 0")
    return ts


def _values_at(sol: OdeSolution, ts):
    return sol(ts) if ts.size > 1 else np.atleast_2d(sol(ts[0]))


def characteristic_problem(arrival: ArrivalParams, service: ServiceParams, z: float, u: float, v: float,
                           t_end: float) -> OdeProblem:
    """Generic-jump system on ``(U, y1, V, int U)``.

    ``U' = 1 - rU - z beta(U) e^{-s mu* y1}``, ``y1' = V``,
    ``V' = 1 - sV - gamma(V) e^{s mu* y1} / z``.
    """
    if z <= 0:
        raise DomainError("z = 0 makes gamma(v)/z singular; use pmf_from_pgf (z >= 1e-3) or Monte Carlo")
    r, s, smu = arrival.r, service.s, service.s * service.mu_star
    beta, gamma = _transform_ext(arrival.jump), _transform_ext(service.jump)

    def rhs(_t, y):
        U, y1, V, _ = y
        e = math.exp(smu * y1)
        return np.array([1.0 - r * U - z * beta(U) / e, V, 1.0 - s * V - gamma(V) * e / z, U])

    return OdeProblem(rhs, [u, 0.0, v, 0.0], (0.0, t_end))


def exponential_characteristic_problem(arrival: ArrivalParams, service: ServiceParams, z: float, u: float,
                                       v: float, t_end: float) -> OdeProblem:
    """Four-component system for exponential jumps, plus ``int y1``.

    ``y1 = U``, ``y2 = V``, ``y3 = z e^{-s mu* int V}`` (positive, decaying
    when V > 0) and ``y4 = exp(-lambda* r int U)``.
    """
    if z <= 0:
        raise DomainError("z = 0 makes gamma(v)/z singular; use pmf_from_pgf (z >= 1e-3) or Monte Carlo")
    if not (isinstance(arrival.jump, Exponential) and isinstance(service.jump, Exponential)):
        raise DomainError("exponential system requires exponential jump laws")
    r, s, smu = arrival.r, service.s, service.s * service.mu_star
    a, b = arrival.jump.rate, service.jump.rate
    lr = arrival.lambda_star * r

    def rhs(_t, y):
        y1, y2, y3, y4, _ = y
        if y1 <= -a or y2 <= -b or y3 <= 0.0:
            return np.full(5, math.nan)
        return np.array([
            1.0 - r * y1 - a * y3 / (a + y1),
            1.0 - s * y2 - b / (y3 * (b + y2)),
            -smu * y2 * y3,
            -lr * y1 * y4,
            y1,
        ])

    return OdeProblem(rhs, [u, v, z, 1.0, 0.0], (0.0, t_end))


def _hsd_curve(arrival, service, z, u, v, ts, conv, rel_tol, abs_tol, solver, step, fast):
    use_fast = fast and isinstance(arrival.jump, Exponential) and isinstance(service.jump, Exponential)
    t_end = float(ts.max())
    if use_fast:
        prob = exponential_characteristic_problem(arrival, service, z, u, v, t_end)
    else:
        prob = characteristic_problem(arrival, service, z, u, v, t_end)
    sol = _solve(prob, ts, rel_tol, abs_tol, solver, step)
    Y = _values_at(sol, ts)
    U, IU = Y[:, 0], (Y[:, 4] if use_fast else Y[:, 3])
    pref = U if conv is ZetaConvention.PREFACTOR_AT_T else np.full_like(U, u)
    out = np.exp(-pref * arrival.lambda0 - arrival.lambda_star * arrival.r * IU)
    if not np.all(np.isfinite(out)):
        raise EvaluationError("non-finite transform value", state=sol.final)
    return out


def zeta_hawkes_sdhawkes(arrival: ArrivalParams, service: ServiceParams, q: TransformQuery,
                         conv: ZetaConvention = DEFAULT_CONVENTION, *, rel_tol: float = RTOL,
                         abs_tol: float = ATOL, solver: str = "adaptive", step: float = 1e-3,
                         fast: bool = True) -> float:
    """Transform of the Hawkes/sdHawkes system at one query.

    Raises :class:`DomainError` for ``z = 0`` and :class:`EvaluationError` when
    the characteristic system cannot be integrated over ``[0, t]`` (for
    instance when ``V`` reaches the pole of ``gamma``).
    """
    if q.z == 0:
        raise DomainError("z = 0 makes gamma(v)/z singular; use pmf_from_pgf (z >= 1e-3) or Monte Carlo")
    if q.t == 0:
        return math.exp(-q.u * arrival.lambda0)
    return float(_hsd_curve(arrival, service, q.z, q.u, q.v, np.array([q.t]), conv,
                            rel_tol, abs_tol, solver, step, fast)[0])


def _msd_curve(lam, service, z, u, v, ts, sign, rel_tol, abs_tol):
    if z <= 0:
        raise DomainError("z = 0 makes gamma(v)/z singular; use pmf_from_pgf (z >= 1e-3) or Monte Carlo")
    s, smu = service.s, service.s * service.mu_star
    gamma = _transform_ext(service.jump)
    plus = sign is SignVariant.PLUS_ONE

    def rhs(_t, y):
        V, y1, _ = y
        Z = z * math.exp(-smu * y1)
        return np.array([1.0 - s * V - gamma(V) / Z, V, Z + 1.0 if plus else 1.0 - Z])

    sol = _solve(OdeProblem(rhs, [v, 0.0, 0.0], (0.0, float(ts.max()))), ts, rel_tol, abs_tol)
    out = np.exp(-u * lam - lam * _values_at(sol, ts)[:, 2])
    if not np.all(np.isfinite(out)):
        raise EvaluationError("non-finite transform value", state=sol.final)
    return out


def zeta_m_sdhawkes(lam: float, service: ServiceParams, q: TransformQuery,
                    sign_variant: SignVariant = DEFAULT_SIGN, *, rel_tol: float = RTOL,
                    abs_tol: float = ATOL) -> float:
    """Transform of the Poisson(``lam``)/sdHawkes system.

    ``MINUS_ONE`` integrates ``1 - z(x)`` in the exponent, ``PLUS_ONE`` the
    literal ``z(x) + 1``. The arrival intensity is constant, so a non-zero
    ``u`` contributes the factor ``exp(-u lam)``.
    """
    if not lam > 0:
        raise DomainError(f"arrival rate must be positive, got {lam!r}")
    if q.z == 0:
        raise DomainError("z = 0 makes gamma(v)/z singular; use pmf_from_pgf (z >= 1e-3) or Monte Carlo")
    if q.t == 0:
        return math.exp(-q.u * lam)
    return float(_msd_curve(lam, service, q.z, q.u, q.v, np.array([q.t]), sign_variant, rel_tol, abs_tol)[0])


def _hm_curve(arrival, mu_star, z, u, ts, conv, as_written, rel_tol, abs_tol):
    r = arrival.r
    beta = _transform_ext(arrival.jump)
    zm1 = z - 1.0

    def rhs(w, y):
        U = y[0]
        return np.array([-r * U - (1.0 + zm1 * math.exp(-mu_star * w)) * beta(U) + 1.0, U])

    sol = _solve(OdeProblem(rhs, [u, 0.0], (0.0, float(ts.max()))), ts, rel_tol, abs_tol)
    Y = _values_at(sol, ts)
    base = arrival.lambda0 if as_written else arrival.lambda_star
    pref = Y[:, 0] if conv is ZetaConvention.PREFACTOR_AT_T else np.full(ts.size, u)
    out = np.exp(-pref * arrival.lambda0 - base * r * Y[:, 1])
    if not np.all(np.isfinite(out)):
        raise EvaluationError("non-finite transform value", state=sol.final)
    return out


def zeta_hawkes_m(arrival: ArrivalParams, mu_star: float, q: TransformQuery,
                  conv: ZetaConvention = DEFAULT_CONVENTION, *, as_written: bool = False,
                  rel_tol: float = RTOL, abs_tol: float = ATOL) -> float:
    """Transform of the Hawkes/M system (service rate ``mu_star`` per customer).

    The exponent uses ``lambda_star * r * int u``; ``as_written=True`` uses
    ``lambda0`` in its place (the two coincide when ``lambda0 = lambda_star``).
    Since ``mu = N mu_star``, a non-zero ``v`` is absorbed by ``z -> z e^{-v mu_star}``.
    """
    if not mu_star > 0:
        raise DomainError(f"mu_star must be positive, got {mu_star!r}")
    if q.t == 0:
        return math.exp(-q.u * arrival.lambda0)
    z_eff = q.z * math.exp(-q.v * mu_star)
    return float(_hm_curve(arrival, mu_star, z_eff, q.u, np.array([q.t]), conv, as_written, rel_tol, abs_tol)[0])


def zeta_mm(lambda0: float, mu0: float, q: TransformQuery) -> float:
    """Closed-form M/M/infinity transform started empty."""
    if not (lambda0 > 0 and mu0 > 0):
        raise DomainError("lambda0 and mu0 must be positive")
    m = lambda0 / mu0 * -math.expm1(-mu0 * q.t)
    return math.exp(-q.u * lambda0 - m * (1.0 - q.z * math.exp(-q.v * mu0)))


def pmf_mm(lambda0: float, mu0: float, t: float, k) -> np.ndarray | float:
    """``P[N_t = k]`` for M/M/infinity started empty: Poisson with mean ``(lambda0/mu0)(1 - e^{-mu0 t})``."""
    if not (lambda0 > 0 and mu0 > 0):
        raise DomainError("lambda0 and mu0 must be positive")
    if t < 0:
        raise DomainError("t must be >= 0")
    if np.any(np.asarray(k) < 0):
        raise DomainError("k must be >= 0")
    m = lambda0 / mu0 * -math.expm1(-mu0 * t)
    return poisson.pmf(k, m) if m > 0 else np.where(np.asarray(k) == 0, 1.0, 0.0)


def pmf_mm_stationary(lambda0: float, mu0: float, k) -> np.ndarray | float:
    """Limiting Poisson(``lambda0 / mu0``) law of the M/M/infinity system size."""
    if not (lambda0 > 0 and mu0 > 0):
        raise DomainError("lambda0 and mu0 must be positive")
    return poisson.pmf(k, lambda0 / mu0)


def zeta_curve(model: Model, z: float, u: float, v: float, ts: Sequence[float], *,
               conv: ZetaConvention = DEFAULT_CONVENTION, sign: SignVariant = DEFAULT_SIGN,
               rel_tol: float = RTOL, abs_tol: float = ATOL) -> np.ndarray:
    """Transform of ``model`` at fixed ``(z, u, v)`` over a time grid, one integration per curve."""
    TransformQuery(0.0, z, u, v)
    ts = _times(ts)
    out = np.empty(ts.size)
    zero = ts == 0
    a, sv = model.arrival, model.service
    kind = model.kind
    lam0 = a.lambda0
    out[zero] = math.exp(-u * lam0)
    pos = ~zero
    if not np.any(pos):
        return out
    tp = ts[pos]
    if kind is ModelKind.MM:
        out[pos] = [zeta_mm(lam0, sv.mu0, TransformQuery(t, z, u, v)) for t in tp]
        return out
    if z == 0 and kind in (ModelKind.HAWKES_SDHAWKES, ModelKind.M_SDHAWKES):
        raise DomainError("z = 0 makes gamma(v)/z singular; use pmf_from_pgf (z >= 1e-3) or Monte Carlo")
    if kind is ModelKind.HAWKES_SDHAWKES:
        out[pos] = _hsd_curve(a, sv, z, u, v, tp, conv, rel_tol, abs_tol, "adaptive", 1e-3, True)
    elif kind is ModelKind.M_SDHAWKES:
        out[pos] = _msd_curve(lam0, sv, z, u, v, tp, sign, rel_tol, abs_tol)
    else:
        out[pos] = _hm_curve(a, sv.mu_star, z * math.exp(-v * sv.mu_star), u, tp, conv, False, rel_tol, abs_tol)
    return out


def zeta_for_model(model: Model, q: TransformQuery, **kw) -> float:
    """Dispatch a single query to the engine matching ``model.kind``."""
    return float(zeta_curve(model, q.z, q.u, q.v, [q.t], **kw)[0])


@dataclass(frozen=True)
class PmfResult:
    """Extracted probabilities with per-entry error estimates and a reliability mask."""

    probabilities: np.ndarray
    error_estimates: np.ndarray
    reliable: np.ndarray


UNRELIABLE_ABOVE = 1e-4


def _newton_monomial(g, z0, h):
    """Monomial coefficients of the interpolant through ``(z0 + j h, g_j)``."""
    K = len(g) - 1
    diffs = np.array(g, dtype=float)
    coef = np.zeros(K + 1)
    basis = np.array([1.0])  # coefficients (ascending) of prod_{i<j} (z - z_i)
    fact_h = 1.0
    for j in range(K + 1):
        coef[: basis.size] += diffs[0] / fact_h * basis
        diffs = np.diff(diffs)
        node = z0 + j * h
        basis = np.convolve(basis, [-node, 1.0])
        fact_h *= (j + 1) * h
    return coef


def pmf_from_pgf(zeta_fn: Callable[[TransformQuery], float], t: float, u: float = 0.0, v: float = 0.0,
                 k_max: int = 10, *, z0: float = 1e-3, eval_error: float = 1e-15) -> PmfResult:
    """``P[N_t = k]``, ``k = 0..k_max``, from the transform on ``[z0, 1]``.

    The function ``z -> zeta(t, z, u, v)`` is interpolated at ``K + 1``
    equispaced nodes by Newton forward differences and the interpolant's
    Taylor coefficients at 0 are returned. The error estimate per entry is
    the larger of the change against a ``K - 2`` node interpolant and the
    amplification of an evaluation error ``eval_error`` (relative, per node)
    through the linear extraction map. The default suits closed forms; for
    ODE-backed transforms pass the integrator's relative tolerance. Entries
    whose estimate exceeds 1e-4 are flagged as unreliable.
    When ``u`` or ``v`` are non-zero the coefficients are those of the
    partial transform rather than probabilities.
    """
    if int(k_max) != k_max or not 0 <= k_max <= 30:
        raise DomainError(f"k_max must be an integer in [0, 30], got {k_max!r}")
    if not 0 < z0 < 1:
        raise DomainError("z0 must lie in (0, 1)")
    K = int(min(max(k_max + 2, 8), 16))
    cache: dict[float, float] = {}

    def g_at(nodes):
        vals = []
        for zz in nodes:
            if zz not in cache:
                cache[zz] = float(zeta_fn(TransformQuery(t, zz, u, v)))
            vals.append(cache[zz])
        return np.array(vals)

    def extract(k_nodes):
        h = (1.0 - z0) / k_nodes
        nodes = [z0 + j * h for j in range(k_nodes)] + [1.0]
        g = g_at(nodes)
        return _newton_monomial(g, z0, h), g, h

    p_hi, g_hi, h_hi = extract(K)
    p_lo, _, _ = extract(K - 2)
    # sensitivity of each coefficient to the node values (the map is linear)
    sens = np.zeros(K + 1)
    for j in range(K + 1):
        e = np.zeros(K + 1)
        e[j] = abs(g_hi[j]) if g_hi[j] != 0 else 1.0
        sens += np.abs(_newton_monomial(e, z0, h_hi))
    n_out = k_max + 1
    probs = np.zeros(n_out)
    errs = np.full(n_out, math.inf)
    m = min(n_out, K + 1)
    lo = np.zeros(K + 1)
    lo[: K - 1] = p_lo
    probs[:m] = p_hi[:m]
    errs[:m] = np.maximum(np.abs(p_hi - lo)[:m], eval_error * sens[:m])
    probs = np.clip(probs, 0.0, 1.0)
    return PmfResult(probs, errs, errs <= UNRELIABLE_ABOVE)
