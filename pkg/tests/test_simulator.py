from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize, stats

from hawkes_queue import (
    ArrivalParams,
    Constant,
    DomainError,
    ExplosionError,
    Exponential,
    Model,
    ModelKind,
    ServiceParams,
    preset,
)
from hawkes_queue.simulator import (
    EventKind,
    McEstimate,
    arrival_intensity_at,
    mc_moments,
    mc_report_json,
    mc_transform,
    service_intensity_at,
    simulate_path,
    simulate_snapshots,
    snapshot,
    trajectory_to_csv,
)


# -- independent oracle: event times by inverting the compensator ----------

def _oracle_path(model: Model, horizon: float, rng: np.random.Generator):
    """State (N, lambda, mu) at ``horizon`` by compensator inversion.

    Between events both intensities follow known exponential flows, so the
    integrated total intensity is available in closed form; the next event
    time solves ``Lambda(w) = E`` with ``E ~ Exp(1)``.
    """
    a, sv = model.arrival, model.service
    t, lam, phi, n = 0.0, a.lambda0, sv.mu0, 0

    def jump(d):
        return d.sample(rng)

    while True:
        d_lam, d_phi = lam - a.lambda_star, phi - sv.mu_star

        def comp(w):
            ia = a.lambda_star * w + d_lam * (1 - math.exp(-a.r * w)) / a.r
            ib = n * (sv.mu_star * w + d_phi * (1 - math.exp(-sv.s * w)) / sv.s) if n else 0.0
            return ia + ib

        e = rng.exponential()
        rest = horizon - t
        if comp(rest) <= e:
            lam = a.lambda_star + d_lam * math.exp(-a.r * rest)
            phi = sv.mu_star + d_phi * math.exp(-sv.s * rest)
            return n, lam, n * phi if n else 0.0
        w = optimize.brentq(lambda x: comp(x) - e, 0.0, rest, xtol=1e-13)
        t += w
        lam = a.lambda_star + d_lam * math.exp(-a.r * w)
        phi = sv.mu_star + d_phi * math.exp(-sv.s * w)
        mu = n * phi if n else 0.0
        if rng.random() * (lam + mu) < lam:
            n += 1
            lam += jump(a.jump)
            if n == 1:
                phi = sv.mu0
        else:
            n -= 1
            phi += jump(sv.jump)
            if n == 1 and not sv.reset_on_busy_period_start:
                phi = sv.mu0


def _two_sample_mean_z(x, y):
    return (np.mean(x) - np.mean(y)) / math.sqrt(np.var(x, ddof=1) / x.size + np.var(y, ddof=1) / y.size)


@pytest.mark.parametrize("name", ["fig1", "fig2", "fig3"])
def test_matches_compensator_inversion_oracle(name):
    model = preset(name)
    rng = np.random.default_rng(7)
    orc = np.array([_oracle_path(model, 1.0, rng) for _ in range(4000)])
    batch = simulate_snapshots(model, [1.0], 40000, 11)
    n = batch.column("N")[:, 0]
    lam = batch.column("lambda")[:, 0]
    mu = batch.column("mu")[:, 0]
    # counts: chi-square homogeneity on merged bins; intensities: KS and mean
    top = 6
    obs = np.array([[np.sum(np.minimum(orc[:, 0], top) == k) for k in range(top + 1)],
                    [np.sum(np.minimum(n, top) == k) for k in range(top + 1)]])
    obs = obs[:, obs.min(axis=0) > 0]
    assert stats.chi2_contingency(obs)[1] > 1e-3
    for ours, theirs in ((lam, orc[:, 1]), (mu, orc[:, 2])):
        assert stats.ks_2samp(ours, theirs).pvalue > 1e-3
        if np.std(ours) > 0:
            assert abs(_two_sample_mean_z(ours, theirs)) < 4


def test_alternative_reset_policy_matches_oracle():
    base = preset("fig1")
    model = base.with_service(reset_on_busy_period_start=False)
    rng = np.random.default_rng(3)
    orc = np.array([_oracle_path(model, 1.5, rng) for _ in range(4000)])
    mu = simulate_snapshots(model, [1.5], 40000, 5).column("mu")[:, 0]
    assert stats.ks_2samp(mu, orc[:, 2]).pvalue > 1e-3


# -- poisson special case ---------------------------------------------------

def test_poisson_interarrivals_are_exponential():
    model = preset("mm-base")
    traj = simulate_path(model, 2000.0, seed=1)
    arr = np.array([e.time for e in traj.events if e.kind is EventKind.ARRIVAL])
    gaps = np.diff(np.concatenate([[0.0], arr]))
    assert stats.kstest(gaps, "expon", args=(0, 1 / model.arrival.lambda0)).pvalue > 1e-3


def test_mm_count_at_t_is_poisson_mean():
    model = preset("mm-base")
    batch = simulate_snapshots(model, [1.0], 50000, 2)
    n = batch.column("N")[:, 0]
    expected = 1 - math.exp(-2.0)  # lambda/mu * (1 - e^{-mu t})
    est = McEstimate.from_samples(n)
    assert abs(est.z_score(expected)) < 4


# -- determinism and seeding ------------------------------------------------

def test_same_seed_same_path():
    m = preset("fig1")
    assert simulate_path(m, 5.0, 42) == simulate_path(m, 5.0, 42)
    assert simulate_path(m, 5.0, 42) != simulate_path(m, 5.0, 43)


def test_batch_path_i_uses_seed_base_plus_i():
    m = preset("fig1")
    batch = simulate_snapshots(m, [3.0], 5, 100)
    for i in range(5):
        n, lam, mu, mm, s = snapshot(simulate_path(m, 3.0, 100 + i), 3.0)
        row = batch.data[i, 0]
        assert row[0] == n and row[3] == mm and row[4] == s
        assert row[1] == pytest.approx(lam, rel=1e-12)
        assert row[2] == pytest.approx(mu, rel=1e-12, abs=1e-300)


def test_snapshot_order_is_preserved():
    m = preset("fig1")
    a = simulate_snapshots(m, [2.0, 0.5, 1.0], 50, 9)
    b = simulate_snapshots(m, [0.5, 1.0, 2.0], 50, 9)
    np.testing.assert_array_equal(a.data[:, 0], b.data[:, 2])
    np.testing.assert_array_equal(a.data[:, 1], b.data[:, 0])


def test_snapshot_at_zero_is_initial_state():
    m = preset("fig1")
    b = simulate_snapshots(m, [0.0], 10, 1)
    np.testing.assert_array_equal(b.column("N"), 0)
    np.testing.assert_array_equal(b.column("lambda"), m.arrival.lambda0)
    np.testing.assert_array_equal(b.column("int_lambda"), 0)


def test_running_integrals_match_event_replay():
    m = preset("fig1")
    traj = simulate_path(m, 2.0, 4)
    grid = np.linspace(0, 2.0, 20001)
    lam = np.empty_like(grid)
    for i, t in enumerate(grid):
        lam[i] = snapshot(traj, t)[1]
    row = simulate_snapshots(m, [2.0], 1, 4).data[0, 0]
    assert row[5] == pytest.approx(np.trapezoid(lam, grid), rel=1e-3)


# -- path invariants --------------------------------------------------------

_jump = st.one_of(
    st.builds(Exponential, st.floats(1.0, 5.0)),
    st.builds(Constant, st.floats(0.0, 0.8)),
)


@st.composite
def _models(draw):
    r = draw(st.floats(1.0, 3.0))
    arrival = ArrivalParams(draw(st.floats(0.2, 3.0)), r, draw(st.floats(0.2, 3.0)), draw(_jump))
    mu_star = draw(st.floats(0.2, 3.0))
    service = ServiceParams(mu_star, draw(st.floats(0.2, 3.0)), draw(st.floats(0.2, 3.0)), draw(_jump),
                            draw(st.booleans()))
    return Model(ModelKind.HAWKES_SDHAWKES, arrival, service)


@settings(max_examples=40)
@given(_models(), st.integers(0, 2**40))
def test_path_invariants(model, seed):
    traj = simulate_path(model, 3.0, seed)
    a = model.arrival
    floor = min(a.lambda0, a.lambda_star)
    m = s = 0
    prev = 0.0
    for e in traj.events:
        assert e.time > prev or (e.time == prev == 0.0)
        prev = e.time
        if e.kind is EventKind.ARRIVAL:
            m += 1
        else:
            s += 1
        assert e.n_after == m - s >= 0
        assert (e.mu_after == 0.0) == (e.n_after == 0)
        assert e.lambda_after >= floor * (1 - 1e-12)
    assert prev <= traj.horizon


def test_intensity_queries_reject_past_times():
    traj = simulate_path(preset("fig1"), 3.0, 0)
    last = traj.events[-1].time
    with pytest.raises(DomainError):
        arrival_intensity_at(traj, last / 2)
    with pytest.raises(DomainError):
        service_intensity_at(traj, last / 2)
    assert arrival_intensity_at(traj, last) == traj.events[-1].lambda_after


def test_explosion_raises_with_stability_hint():
    arrival = ArrivalParams(2.0, 1.0, 2.0, Constant(1.5))
    m = Model(ModelKind.HAWKES_SDHAWKES, arrival, preset("fig1").service)
    with pytest.raises(ExplosionError, match=r"E\[B\] < r"):
        simulate_path(m, 50.0, 0, cap=10_000)


# -- estimators and formats -------------------------------------------------

def test_mc_estimate_basic():
    e = McEstimate.from_samples([1.0, 2.0, 3.0, 4.0])
    assert e.value == 2.5
    assert e.std_error == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    c = McEstimate.from_samples([5.0] * 10)
    assert c.std_error == 0.0 and c.z_score(5.0) == 0.0 and math.isinf(c.z_score(6.0))


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=30),
       st.lists(st.floats(-10, 10), min_size=2, max_size=30))
def test_combine_is_symmetric_and_matches_pooled(x, y):
    a, b = McEstimate.from_samples(x), McEstimate.from_samples(y)
    ab, ba = a.combine(b), b.combine(a)
    assert ab.value == pytest.approx(ba.value, abs=1e-9)
    assert ab.std_error == pytest.approx(ba.std_error, abs=1e-9)
    pooled = np.array(x + y)
    assert ab.value == pytest.approx(pooled.mean(), abs=1e-9)
    assert ab.std_error == pytest.approx(np.std(pooled, ddof=1) / math.sqrt(pooled.size), abs=1e-9)


def test_mc_transform_normalisation_and_single_query():
    m = preset("fig1")
    e = mc_transform(m, (1.0, 1.0, 0.0, 0.0), 100, 0)
    assert isinstance(e, McEstimate) and e.value == 1.0 and e.std_error == 0.0
    es = mc_transform(m, [(1.0, 0.5, 0.0, 0.0), (2.0, 1.0, 1.0, 0.0)], 100, 0)
    assert len(es) == 2 and all(0 < x.value < 1 for x in es)
    with pytest.raises(DomainError):
        mc_transform(m, (1.0, 1.5, 0.0, 0.0), 10, 0)


def test_mc_moments_fields():
    out = mc_moments(preset("fig1"), [0.5, 1.0], 2000, 0)
    assert [o.t for o in out] == [0.5, 1.0]
    assert out[1].mean_M.value > out[0].mean_M.value
    assert out[0].var_lambda.std_error > 0


def test_trajectory_csv_format():
    traj = simulate_path(preset("fig1"), 2.0, 8)
    lines = trajectory_to_csv(traj).splitlines()
    assert lines[0] == "time,kind,n,lambda,mu"
    assert len(lines) == len(traj.events) + 1
    t, kind, n, lam, mu = lines[1].split(",")
    assert kind in "AD" and float(t) == pytest.approx(traj.events[0].time, rel=1e-11)


def test_mc_report_json_round_trip():
    est = [McEstimate(1.0, 0.1, 10), McEstimate(2.0, 0.2, 10)]
    d = json.loads(mc_report_json([0.5, 1.0], est))
    assert d == {"t": [0.5, 1.0], "estimate": [1.0, 2.0], "std_error": [0.1, 0.2], "n_paths": [10, 10]}


def test_snapshot_validation():
    m = preset("fig1")
    with pytest.raises(DomainError):
        simulate_snapshots(m, [-1.0], 10, 0)
    with pytest.raises(DomainError):
        simulate_snapshots(m, [1.0], 0, 0)
    with pytest.raises(DomainError):
        simulate_path(m, 0.0, 0)
