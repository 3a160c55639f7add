from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, linalg

from hawkes_queue import (
    ArrivalParams,
    Constant,
    DomainError,
    EvaluationError,
    Exponential,
    Model,
    ModelKind,
    ServiceParams,
    preset,
)
from hawkes_queue.moments import mean_lambda
from hawkes_queue.simulator import mc_transform
from hawkes_queue.transform import (
    SignVariant,
    TransformQuery,
    ZetaConvention,
    characteristic_problem,
    exponential_characteristic_problem,
    pmf_from_pgf,
    pmf_mm,
    pmf_mm_stationary,
    zeta_curve,
    zeta_for_model,
    zeta_hawkes_m,
    zeta_hawkes_sdhawkes,
    zeta_m_sdhawkes,
    zeta_mm,
)

FIG1 = preset("fig1")
FIG2 = preset("fig2")
FIG3 = preset("fig3")


# -- M/M/inf against the Kolmogorov forward equation -------------------------

def _mm_oracle_pmf(lam, mu, t, n_max=80):
    """Distribution of N_t from the truncated birth-death generator."""
    Q = np.zeros((n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        if n < n_max:
            Q[n, n + 1] = lam
        if n > 0:
            Q[n, n - 1] = n * mu
        Q[n, n] = -Q[n].sum()
    p0 = np.zeros(n_max + 1)
    p0[0] = 1.0
    return p0 @ linalg.expm(Q * t)


@pytest.mark.parametrize("lam,mu,t", [(2.0, 2.0, 1.0), (3.0, 0.5, 4.0), (1.0, 5.0, 0.2)])
def test_mm_pmf_matches_generator(lam, mu, t):
    p = _mm_oracle_pmf(lam, mu, t)
    k = np.arange(30)
    np.testing.assert_allclose(pmf_mm(lam, mu, t, k), p[:30], atol=1e-12)


@pytest.mark.parametrize("z,u,v", [(0.0, 0.0, 0.0), (0.4, 0.0, 0.0), (0.7, 1.0, 0.5), (1.0, 0.0, 2.0)])
def test_mm_transform_matches_generator(z, u, v):
    lam, mu, t = 2.0, 2.0, 1.5
    p = _mm_oracle_pmf(lam, mu, t)
    n = np.arange(p.size)
    expected = math.exp(-u * lam) * np.sum(p * (z * math.exp(-v * mu)) ** n)
    assert zeta_mm(lam, mu, TransformQuery(t, z, u, v)) == pytest.approx(expected, rel=1e-12)


def test_mm_stationary():
    np.testing.assert_allclose(pmf_mm(2.0, 2.0, 60.0, np.arange(10)), pmf_mm_stationary(2.0, 2.0, np.arange(10)),
                               atol=1e-15)


# -- characteristic systems against an independent integrator ----------------

def _oracle_solve(problem):
    return integrate.solve_ivp(problem.rhs, problem.t_span, problem.y0, method="DOP853",
                               rtol=1e-12, atol=1e-14).y[:, -1]


@pytest.mark.parametrize("z,u,v,t", [(0.7, 0.0, 0.0, 1.0), (0.3, 1.0, 1.0, 0.5), (1.0, 1.0, 0.0, 2.0)])
def test_hawkes_sdhawkes_engine_integrates_its_system(z, u, v, t):
    a, s = FIG1.arrival, FIG1.service
    y = _oracle_solve(exponential_characteristic_problem(a, s, z, u, v, t))
    expected = math.exp(-y[0] * a.lambda0 - a.lambda_star * a.r * y[4])
    got = zeta_hawkes_sdhawkes(a, s, TransformQuery(t, z, u, v))
    assert got == pytest.approx(expected, rel=1e-8)


def test_generic_and_exponential_systems_agree():
    a, s = FIG1.arrival, FIG1.service
    for q in [TransformQuery(1.0, 0.7, 0.0, 0.0), TransformQuery(0.5, 0.3, 1.0, 1.0)]:
        fast = zeta_hawkes_sdhawkes(a, s, q)
        slow = zeta_hawkes_sdhawkes(a, s, q, fast=False)
        assert fast == pytest.approx(slow, rel=1e-8)
    y = _oracle_solve(characteristic_problem(a, s, 0.7, 0.0, 0.0, 1.0))
    assert y.shape == (4,)


def test_rk4_and_adaptive_agree():
    a, s = FIG1.arrival, FIG1.service
    q = TransformQuery(1.0, 0.7, 0.5, 0.5)
    assert zeta_hawkes_sdhawkes(a, s, q, solver="rk4", step=1e-3) == pytest.approx(
        zeta_hawkes_sdhawkes(a, s, q), rel=1e-9)


def test_m_sdhawkes_engine_integrates_its_system():
    lam, sv = FIG2.arrival.lambda0, FIG2.service
    z, u, v, t = 0.6, 0.5, 0.5, 1.0
    b, smu = sv.jump.rate, sv.s * sv.mu_star

    def rhs(_, y):
        V, y1, _i = y
        Z = z * math.exp(-smu * y1)
        return [1 - sv.s * V - b / (b + V) / Z, V, 1 - Z]

    y = integrate.solve_ivp(rhs, (0, t), [v, 0, 0], method="DOP853", rtol=1e-12, atol=1e-14).y[:, -1]
    expected = math.exp(-u * lam - lam * y[2])
    assert zeta_m_sdhawkes(lam, sv, TransformQuery(t, z, u, v)) == pytest.approx(expected, rel=1e-8)
    plus = zeta_m_sdhawkes(lam, sv, TransformQuery(t, z, u, v), SignVariant.PLUS_ONE)
    assert plus < expected  # the literal sign only adds to the exponent


def test_hawkes_m_mean_system_size_matches_moment_oracle():
    # E[N_t] = int_0^t E[lambda_s] e^{-mu (t - s)} ds for memoryless service
    a, mu, t, h = FIG3.arrival, FIG3.service.mu_star, 1.0, 1e-6
    expected = integrate.quad(lambda s: mean_lambda(a, s) * math.exp(-mu * (t - s)), 0, t, epsabs=1e-13)[0]
    g = lambda z: zeta_hawkes_m(a, mu, TransformQuery(t, z))
    assert (g(1.0) - g(1.0 - h)) / h == pytest.approx(expected, rel=1e-4)


@pytest.mark.parametrize("model", [FIG1, FIG3], ids=["hsd", "hm"])
def test_u_derivative_is_mean_intensity(model):
    h = 1e-6
    f = lambda u: zeta_for_model(model, TransformQuery(1.0, 1.0, u, 0.0))
    assert -(f(h) - f(0.0)) / h == pytest.approx(mean_lambda(model.arrival, 1.0), rel=1e-4)


def test_hawkes_m_reduces_to_mm_without_excitation():
    arrival = ArrivalParams(2.0, 2.0, 2.0, Constant(0.0))
    for q in [TransformQuery(1.0, 0.4, 0.3, 0.2), TransformQuery(3.0, 0.0, 0.0, 0.0)]:
        assert zeta_hawkes_m(arrival, 2.0, q) == pytest.approx(zeta_mm(2.0, 2.0, q), rel=1e-9)


def test_hawkes_m_as_written_matches_when_baselines_coincide():
    q = TransformQuery(1.0, 0.5, 0.5, 0.0)
    a = FIG3.arrival
    assert zeta_hawkes_m(a, 2.0, q, as_written=True) == pytest.approx(zeta_hawkes_m(a, 2.0, q), rel=1e-14)
    a2 = ArrivalParams(1.0, 2.0, 3.0, Exponential(2.0))
    assert zeta_hawkes_m(a2, 2.0, q, as_written=True) != pytest.approx(zeta_hawkes_m(a2, 2.0, q), rel=1e-6)


def test_hawkes_m_matches_monte_carlo():
    queries = [TransformQuery(t, z, u, v) for t in (0.5, 2.0) for z in (0.3, 1.0) for u in (0.0, 1.0)
               for v in (0.0, 1.0)]
    mc = mc_transform(FIG3, queries, 50_000, 17)
    for q, e in zip(queries, mc):
        assert abs(e.z_score(zeta_for_model(FIG3, q))) <= 4, q


# -- general contracts -------------------------------------------------------

@pytest.mark.parametrize("model", [FIG1, FIG2, FIG3, preset("mm-base")], ids=lambda m: m.kind.value)
def test_normalisation_and_time_zero(model):
    assert zeta_for_model(model, TransformQuery(1.0, 1.0, 0.0, 0.0)) == pytest.approx(1.0, abs=1e-6)
    assert zeta_for_model(model, TransformQuery(0.0, 0.5, 0.7, 0.3)) == pytest.approx(
        math.exp(-0.7 * model.arrival.lambda0))


def test_zero_z_rejected_where_singular():
    with pytest.raises(DomainError):
        zeta_hawkes_sdhawkes(FIG1.arrival, FIG1.service, TransformQuery(1.0, 0.0))
    with pytest.raises(DomainError):
        zeta_m_sdhawkes(2.0, FIG2.service, TransformQuery(1.0, 0.0))
    assert zeta_hawkes_m(FIG3.arrival, 2.0, TransformQuery(1.0, 0.0)) > 0


@pytest.mark.parametrize("kw", [dict(t=-1, z=0.5), dict(t=1, z=1.5), dict(t=1, z=0.5, u=-1), dict(t=1, z=math.nan)])
def test_query_validation(kw):
    with pytest.raises(DomainError):
        TransformQuery(**kw)


def test_pole_surfaces_as_evaluation_error():
    # large v drives V toward the pole of the service-jump transform
    with pytest.raises(EvaluationError):
        zeta_hawkes_sdhawkes(FIG1.arrival, FIG1.service, TransformQuery(5.0, 0.05, 0.0, 0.0))


def test_curve_matches_pointwise():
    ts = [0.0, 0.5, 1.0, 2.0]
    for model in (FIG2, FIG3):
        curve = zeta_curve(model, 0.6, 0.2, 0.1, ts)
        single = [zeta_for_model(model, TransformQuery(t, 0.6, 0.2, 0.1)) for t in ts]
        np.testing.assert_allclose(curve, single, rtol=1e-7)


@settings(max_examples=25)
@given(st.floats(0.05, 3.0), st.floats(0.0, 1.0), st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_hawkes_m_range_and_monotonicity(t, z, u, v):
    q = TransformQuery(t, z, u, v)
    val = zeta_for_model(FIG3, q)
    assert 0.0 <= val <= 1.0 + 1e-9
    if z < 1.0:
        assert zeta_for_model(FIG3, TransformQuery(t, min(1.0, z + 0.1), u, v)) >= val - 1e-9


@pytest.mark.xfail(strict=True, reason="Hawkes/sdHawkes engine leaves [0, 1] at the reference parameters")
def test_hawkes_sdhawkes_stays_in_unit_interval():
    val = zeta_hawkes_sdhawkes(FIG1.arrival, FIG1.service, TransformQuery(2.0, 0.3, 0.0, 0.0))
    assert 0.0 <= val <= 1.0


# -- pmf extraction ----------------------------------------------------------

def test_pmf_extraction_mm():
    res = pmf_from_pgf(lambda q: zeta_mm(2.0, 2.0, q), 1.0, k_max=10)
    exact = pmf_mm(2.0, 2.0, 1.0, np.arange(11))
    assert np.all(res.reliable)
    err = np.abs(res.probabilities - exact)
    assert np.all(err <= np.maximum(res.error_estimates, 1e-12))
    assert err.max() < 1e-6


def test_pmf_axioms_hawkes_m():
    res = pmf_from_pgf(lambda q: zeta_for_model(FIG3, q), 1.0, k_max=8, eval_error=1e-10)
    p = res.probabilities
    assert np.all((p >= 0) & (p <= 1))
    assert p[res.reliable].sum() <= 1.0 + 1e-6
    assert p.sum() == pytest.approx(1.0, abs=1e-3)
    assert res.reliable[0]


def test_pmf_flags_unreliable_when_noisy():
    noisy = lambda q: zeta_mm(2.0, 2.0, q) * (1 + 1e-7 * math.sin(1e4 * q.z))
    res = pmf_from_pgf(noisy, 1.0, k_max=10, eval_error=1e-7)
    assert not np.all(res.reliable)


@pytest.mark.parametrize("k_max", [-1, 31, 2.5])
def test_pmf_rejects_bad_order(k_max):
    with pytest.raises(DomainError):
        pmf_from_pgf(lambda q: 1.0, 1.0, k_max=k_max)


def test_convention_enum_values():
    assert {c.value for c in ZetaConvention} == {"at-zero", "at-t"}
    assert {c.value for c in SignVariant} == {"plus-one", "minus-one"}


def test_reset_policy_is_ignored_by_hawkes_m_kind():
    m = Model(ModelKind.HAWKES_M, FIG3.arrival, ServiceParams(2.0, 2.0, 2.0, Constant(0.0), False))
    q = TransformQuery(1.0, 0.5)
    assert zeta_for_model(m, q) == zeta_for_model(FIG3, q)
