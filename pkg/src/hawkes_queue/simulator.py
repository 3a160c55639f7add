"""Exact event-driven simulation of Hawkes/sdHawkes infinite-server queues.

Paths are generated by Ogata thinning. Between events the state is
deterministic: the arrival intensity relaxes toward ``lambda_star`` at rate
``r`` and the per-customer service factor relaxes toward ``mu_star`` at rate
``s``; the pooled service intensity is ``N`` times that factor. Every path
draws from its own stream seeded from ``base_seed + i`` so results do not
depend on scheduling or thread count.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numba
import numpy as np
from numba import njit, prange

from .errors import DomainError, ExplosionError, SimulationError
from .model import Constant, Exponential, Model

__all__ = [
    "EventKind",
    "Event",
    "Trajectory",
    "McEstimate",
    "SnapshotBatch",
    "MomentEstimates",
    "arrival_intensity_at",
    "service_intensity_at",
    "simulate_path",
    "simulate_snapshots",
    "snapshot",
    "mc_transform",
    "mc_moments",
    "trajectory_to_csv",
    "mc_report_json",
    "DEFAULT_EVENT_CAP",
]

DEFAULT_EVENT_CAP = 10_000_000

# snapshot columns
N, LAM, MU, M, S, INT_LAM, INT_LAM2, INT_MU, INT_M, INT_LAM_M = range(10)
N_COLS = 10

_OK, _EXPLODED, _BOUND_VIOLATED = 0, 1, 2


def _configure_threads():
    raw = os.environ.get("HAWKES_QUEUE_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"HAWKES_QUEUE_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise DomainError("HAWKES_QUEUE_THREADS must be >= 0")
    if n > 0:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _jump_code(d):
    if isinstance(d, Exponential):
        return 1.0, d.rate
    if isinstance(d, Constant):
        return 0.0, d.value
    raise DomainError(f"unsupported jump law {d!r}")


def _pack(model: Model) -> np.ndarray:
    a, s = model.arrival, model.service
    bk, bp = _jump_code(a.jump)
    ck, cp = _jump_code(s.jump)
    return np.array([a.lambda_star, a.r, a.lambda0, bk, bp,
                     s.mu_star, s.s, s.mu0, ck, cp,
                     1.0 if s.reset_on_busy_period_start else 0.0])


@njit(cache=True)
def _splitmix64(x):
    z = (np.uint64(x) + np.uint64(0x9E3779B97F4A7C15))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _seed_stream(seed):
    np.random.seed(np.uint32(_splitmix64(np.uint64(seed)) & np.uint64(0xFFFFFFFF)))


@njit(cache=True)
def _draw_jump(kind, param):
    if kind == 1.0:
        return -math.log1p(-np.random.random()) / param
    return param


@njit(cache=True)
def _advance(dt, lam, phi, n, m, lam_star, r, mu_star, s, acc):
    """Deterministic flow over ``dt``; adds exact integrals into ``acc``."""
    d = lam - lam_star
    e1 = -math.expm1(-r * dt) / r
    e2 = -math.expm1(-2.0 * r * dt) / (2.0 * r)
    int_lam = lam_star * dt + d * e1
    acc[0] += int_lam
    acc[1] += lam_star * lam_star * dt + 2.0 * lam_star * d * e1 + d * d * e2
    if n > 0:
        acc[2] += n * (mu_star * dt - (phi - mu_star) * math.expm1(-s * dt) / s)
    acc[3] += m * dt
    acc[4] += m * int_lam
    lam_new = lam_star + d * math.exp(-r * dt)
    phi_new = mu_star + (phi - mu_star) * math.exp(-s * dt)
    return lam_new, phi_new


@njit(cache=True)
def _run(par, seed, times, cap, record, snaps):
    """Simulate one path up to ``times[-1]``; fill ``snaps`` at ``times``.

    Returns (status, n_events, event_time, event_kind, event_n, event_lam, event_mu).
    """
    lam_star, r, lam0 = par[0], par[1], par[2]
    bk, bp = par[3], par[4]
    mu_star, s, mu0 = par[5], par[6], par[7]
    ck, cp = par[8], par[9]
    busy_reset = par[10] == 1.0

    _seed_stream(seed)
    cap_buf = 16 if record else 1
    ev_t = np.empty(cap_buf)
    ev_k = np.empty(cap_buf, dtype=np.int8)
    ev_n = np.empty(cap_buf, dtype=np.int64)
    ev_l = np.empty(cap_buf)
    ev_m = np.empty(cap_buf)
    n_ev = 0

    acc = np.zeros(5)
    t = 0.0
    lam = lam0
    phi = mu0
    n = 0
    m = 0
    sc = 0
    horizon = times[-1]
    j = 0
    # snapshots requested at t = 0
    while j < times.size and times[j] <= 0.0:
        snaps[j, 0] = n
        snaps[j, 1] = lam
        snaps[j, 2] = 0.0
        snaps[j, 3] = m
        snaps[j, 4] = sc
        for c in range(5):
            snaps[j, 5 + c] = 0.0
        j += 1
    while j < times.size:
        bound = max(lam, lam_star) + n * max(phi, mu_star)
        if bound > 0.0:
            w = -math.log1p(-np.random.random()) / bound
        else:
            w = math.inf
        if t + w > times[j]:
            # restart the clock at the snapshot; exponential clocks are memoryless
            lam, phi = _advance(times[j] - t, lam, phi, n, m, lam_star, r, mu_star, s, acc)
            t = times[j]
            while j < times.size and times[j] <= t:
                snaps[j, 0] = n
                snaps[j, 1] = lam
                snaps[j, 2] = n * phi if n > 0 else 0.0
                snaps[j, 3] = m
                snaps[j, 4] = sc
                for c in range(5):
                    snaps[j, 5 + c] = acc[c]
                j += 1
            continue
        lam, phi = _advance(w, lam, phi, n, m, lam_star, r, mu_star, s, acc)
        t += w
        mu = n * phi if n > 0 else 0.0
        total = lam + mu
        if total > bound * (1.0 + 1e-12):
            return _BOUND_VIOLATED, n_ev, ev_t, ev_k, ev_n, ev_l, ev_m
        x = np.random.random() * bound
        if x >= total:
            continue
        if x < lam:
            kind = 0
            m += 1
            n += 1
            lam += _draw_jump(bk, bp)
            if n == 1:
                phi = mu0
        else:
            kind = 1
            sc += 1
            n -= 1
            phi += _draw_jump(ck, cp)
            if n == 1 and not busy_reset:
                phi = mu0
        if m + sc > cap:
            return _EXPLODED, n_ev, ev_t, ev_k, ev_n, ev_l, ev_m
        if record:
            if n_ev == ev_t.size:
                size = 2 * ev_t.size
                ev_t2 = np.empty(size)
                ev_k2 = np.empty(size, dtype=np.int8)
                ev_n2 = np.empty(size, dtype=np.int64)
                ev_l2 = np.empty(size)
                ev_m2 = np.empty(size)
                ev_t2[:n_ev] = ev_t
                ev_k2[:n_ev] = ev_k
                ev_n2[:n_ev] = ev_n
                ev_l2[:n_ev] = ev_l
                ev_m2[:n_ev] = ev_m
                ev_t, ev_k, ev_n, ev_l, ev_m = ev_t2, ev_k2, ev_n2, ev_l2, ev_m2
            ev_t[n_ev] = t
            ev_k[n_ev] = kind
            ev_n[n_ev] = n
            ev_l[n_ev] = lam
            ev_m[n_ev] = n * phi if n > 0 else 0.0
            n_ev += 1
    return _OK, n_ev, ev_t, ev_k, ev_n, ev_l, ev_m


@njit(cache=True, parallel=True)
def _batch(par, base_seed, n_paths, times, cap):
    out = np.empty((n_paths, times.size, N_COLS))
    status = np.zeros(n_paths, dtype=np.int8)
    for i in prange(n_paths):
        res = _run(par, base_seed + i, times, cap, False, out[i])
        status[i] = res[0]
    return out, status


class EventKind(enum.Enum):
    ARRIVAL = "A"
    DEPARTURE = "D"


@dataclass(frozen=True)
class Event:
    time: float
    kind: EventKind
    lambda_after: float
    mu_after: float
    n_after: int


@dataclass(frozen=True)
class Trajectory:
    """One sample path on ``[0, horizon]``; ``model`` gives the flow between events."""

    events: tuple[Event, ...]
    horizon: float
    seed: int
    model: Model

    def prefix(self, t: float) -> "Trajectory":
        """The history up to and including time ``t``."""
        return Trajectory(tuple(e for e in self.events if e.time <= t), t, self.seed, self.model)


def _last_state(history: Trajectory, t: float):
    if history.events and t < history.events[-1].time:
        raise DomainError(f"t={t} precedes the last event of the history at {history.events[-1].time}")
    if not history.events:
        return 0.0, history.model.arrival.lambda0, 0.0, 0
    e = history.events[-1]
    return e.time, e.lambda_after, e.mu_after, e.n_after


def arrival_intensity_at(history: Trajectory, t: float) -> float:
    """Arrival intensity at ``t``, which must not precede the history's last event."""
    t_last, lam, _, _ = _last_state(history, t)
    a = history.model.arrival
    return a.lambda_star + (lam - a.lambda_star) * math.exp(-a.r * (t - t_last))


def service_intensity_at(history: Trajectory, t: float) -> float:
    """Pooled service intensity ``N_t * factor(t)`` at ``t`` (same precondition)."""
    t_last, _, mu, n = _last_state(history, t)
    if n == 0:
        return 0.0
    sv = history.model.service
    phi = mu / n
    return n * (sv.mu_star + (phi - sv.mu_star) * math.exp(-sv.s * (t - t_last)))


def snapshot(traj: Trajectory, t: float) -> tuple[int, float, float, int, int]:
    """Replayed state ``(N, lambda, mu, M, S)`` at ``t``; jumps at exactly ``t`` are included."""
    if not 0.0 <= t <= traj.horizon:
        raise DomainError(f"t={t} outside [0, {traj.horizon}]")
    hist = traj.prefix(t)
    m = sum(1 for e in hist.events if e.kind is EventKind.ARRIVAL)
    s = len(hist.events) - m
    _, _, _, n = _last_state(hist, t)
    return n, arrival_intensity_at(hist, t), service_intensity_at(hist, t), m, s


def _check_status(status, model):
    if np.any(status == _EXPLODED):
        raise ExplosionError(
            f"event cap exceeded; the arrival process explodes unless E[B] < r "
            f"(here E[B]={model.arrival.jump.mean:g}, r={model.arrival.r:g})")
    if np.any(status == _BOUND_VIOLATED):
        raise SimulationError("thinning bound violated: total intensity exceeded the dominating rate")


def simulate_path(model: Model, horizon: float, seed: int, cap: int = DEFAULT_EVENT_CAP) -> Trajectory:
    """One path on ``[0, horizon]``. Path ``i`` of a batch with base seed ``b`` uses seed ``b + i``."""
    if not horizon > 0:
        raise DomainError(f"horizon must be positive, got {horizon!r}")
    snaps = np.empty((1, N_COLS))
    status, n_ev, ev_t, ev_k, ev_n, ev_l, ev_m = _run(
        _pack(model), np.int64(seed), np.array([float(horizon)]), cap, True, snaps)
    _check_status(np.array([status]), model)
    kinds = (EventKind.ARRIVAL, EventKind.DEPARTURE)
    events = tuple(Event(float(ev_t[i]), kinds[ev_k[i]], float(ev_l[i]), float(ev_m[i]), int(ev_n[i]))
                   for i in range(n_ev))
    return Trajectory(events, float(horizon), int(seed), model)


@dataclass(frozen=True)
class SnapshotBatch:
    """State and running integrals of ``n_paths`` paths at each of ``times``.

    ``data[i, j, c]`` is column ``c`` of path ``i`` at ``times[j]``; columns are
    N, lambda, mu, M, S and the integrals of lambda, lambda^2, mu, M and lambda*M
    from 0 to the snapshot time, integrated exactly between events.
    """

    times: np.ndarray
    data: np.ndarray

    def column(self, name: str) -> np.ndarray:
        return self.data[:, :, _COLUMNS[name]]


_COLUMNS = {"N": N, "lambda": LAM, "mu": MU, "M": M, "S": S, "int_lambda": INT_LAM,
            "int_lambda2": INT_LAM2, "int_mu": INT_MU, "int_M": INT_M, "int_lambdaM": INT_LAM_M}


def simulate_snapshots(model: Model, times: Sequence[float], n_paths: int, base_seed: int,
                       cap: int = DEFAULT_EVENT_CAP) -> SnapshotBatch:
    ts = np.asarray(times, dtype=float)
    if ts.ndim != 1 or ts.size == 0:
        raise DomainError("times must be a non-empty 1-d sequence")
    if np.any(ts < 0) or np.any(~np.isfinite(ts)):
        raise DomainError("snapshot times must be finite and non-negative")
    if n_paths < 1:
        raise DomainError("n_paths must be positive")
    order = np.argsort(ts, kind="stable")
    _configure_threads()
    data, status = _batch(_pack(model), np.int64(base_seed), int(n_paths), ts[order], cap)
    _check_status(status, model)
    out = np.empty_like(data)
    out[:, order, :] = data
    return SnapshotBatch(ts, out)


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with standard error ``sd / sqrt(n_paths)``."""

    value: float
    std_error: float
    n_paths: int

    @classmethod
    def from_samples(cls, x) -> "McEstimate":
        x = np.asarray(x, dtype=float).ravel()
        n = x.size
        if n == 0:
            raise DomainError("no samples")
        if np.all(x == x[0]):
            return cls(float(x[0]), 0.0, n)
        se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        return cls(float(np.mean(x)), se, n)

    def _m2(self):
        return self.std_error**2 * self.n_paths * (self.n_paths - 1)

    def combine(self, other: "McEstimate") -> "McEstimate":
        """Pooled estimate of two independent batches; symmetric in its arguments."""
        n = self.n_paths + other.n_paths
        mean = (self.n_paths * self.value + other.n_paths * other.value) / n
        delta = other.value - self.value
        m2 = self._m2() + other._m2() + delta * delta * (self.n_paths * other.n_paths / n)
        return McEstimate(mean, math.sqrt(m2 / (n - 1) / n), n)

    def z_score(self, analytic: float) -> float:
        diff = analytic - self.value
        if self.std_error == 0.0:
            return 0.0 if abs(diff) <= 1e-12 else math.copysign(math.inf, diff)
        return diff / self.std_error

    def to_dict(self) -> dict:
        return {"estimate": self.value, "std_error": self.std_error, "n_paths": self.n_paths}


def _transform_samples(batch, j, z, u, v):
    n = batch.data[:, j, N]
    lam = batch.data[:, j, LAM]
    mu = batch.data[:, j, MU]
    zn = np.ones_like(n) if z == 1.0 else np.power(z, n)
    return zn * np.exp(-u * lam - v * mu)


def _query_tuple(q):
    if hasattr(q, "t"):
        return float(q.t), float(q.z), float(q.u), float(q.v)
    t, z, u, v = (float(x) for x in q)
    return t, z, u, v


def mc_transform(model: Model, queries, n_paths: int, base_seed: int) -> list[McEstimate] | McEstimate:
    """Monte Carlo estimate of ``E[z^N e^{-u lambda} e^{-v mu}]`` at each query.

    ``queries`` is one query or a sequence; a query is anything with
    ``t, z, u, v`` attributes or a 4-tuple. All queries share the same paths.
    """
    single = hasattr(queries, "t") or (len(queries) == 4 and np.isscalar(queries[0]))
    qs = [_query_tuple(queries)] if single else [_query_tuple(q) for q in queries]
    for t, z, u, v in qs:
        if not (t >= 0 and 0 <= z <= 1 and u >= 0 and v >= 0):
            raise DomainError(f"query outside domain: t={t}, z={z}, u={u}, v={v}")
    times = sorted({q[0] for q in qs})
    batch = simulate_snapshots(model, times, n_paths, base_seed)
    idx = {t: j for j, t in enumerate(batch.times)}
    out = [McEstimate.from_samples(_transform_samples(batch, idx[t], z, u, v)) for t, z, u, v in qs]
    return out[0] if single else out


@dataclass(frozen=True)
class MomentEstimates:
    t: float
    mean_lambda: McEstimate
    var_lambda: McEstimate
    mean_M: McEstimate
    var_M: McEstimate
    mean_N: McEstimate


def _variance_estimate(x) -> McEstimate:
    """Sample variance with the delta-method standard error sqrt((m4 - s^4) / n)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if np.all(x == x[0]):
        return McEstimate(0.0, 0.0, n)
    dev = x - x.mean()
    var = float(np.var(x, ddof=1))
    m4 = float(np.mean(dev**4))
    return McEstimate(var, math.sqrt(max(m4 - var * var, 0.0) / n), n)


def mc_moments(model: Model, t_grid: Sequence[float], n_paths: int, base_seed: int) -> list[MomentEstimates]:
    batch = simulate_snapshots(model, t_grid, n_paths, base_seed)
    out = []
    for j, t in enumerate(batch.times):
        lam = batch.data[:, j, LAM]
        m = batch.data[:, j, M]
        out.append(MomentEstimates(
            float(t),
            McEstimate.from_samples(lam),
            _variance_estimate(lam),
            McEstimate.from_samples(m),
            _variance_estimate(m),
            McEstimate.from_samples(batch.data[:, j, N]),
        ))
    return out


def _g12(x: float) -> str:
    return f"{x:.12g}"


def trajectory_to_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "kind", "n", "lambda", "mu"])
    for e in traj.events:
        w.writerow([_g12(e.time), e.kind.value, e.n_after, _g12(e.lambda_after), _g12(e.mu_after)])
    return buf.getvalue()


def mc_report_json(ts: Iterable[float], estimates: Iterable[McEstimate]) -> str:
    ts = list(ts)
    est = list(estimates)
    return json.dumps({
        "t": ts,
        "estimate": [e.value for e in est],
        "std_error": [e.std_error for e in est],
        "n_paths": [e.n_paths for e in est],
    }, indent=2)
