"""Model parameters, jump-size laws and their analytic functionals."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DomainError, ParameterError


@dataclass(frozen=True)
class Exponential:
    """Exponentially distributed jump with the given rate (mean ``1/rate``)."""

    rate: float

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ParameterError("rate", f"must be a positive finite number, got {self.rate!r}")

    kind = "exponential"

    @property
    def param(self) -> float:
        return self.rate

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    def raw_moment(self, n: int) -> float:
        _check_order(n)
        return math.factorial(n) / self.rate**n

    def laplace(self, u: float) -> float:
        _check_laplace_arg(u)
        return self.rate / (self.rate + u)

    def laplace_ext(self, u: float) -> float:
        # analytic continuation to u > -rate; the characteristic ODEs leave u >= 0
        if u <= -self.rate:
            raise DomainError(f"E[exp(-uX)] diverges for u={u!r} <= -rate={-self.rate!r}")
        return self.rate / (self.rate + u)

    def sample(self, rng: np.random.Generator) -> float:
        return -math.log1p(-rng.random()) / self.rate


@dataclass(frozen=True)
class Constant:
    """Degenerate jump of fixed size; ``Constant(0)`` switches excitation off."""

    value: float

    def __post_init__(self):
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise ParameterError("value", f"must be a non-negative finite number, got {self.value!r}")

    kind = "constant"

    @property
    def param(self) -> float:
        return self.value

    @property
    def mean(self) -> float:
        return self.value

    def raw_moment(self, n: int) -> float:
        _check_order(n)
        return self.value**n

    def laplace(self, u: float) -> float:
        _check_laplace_arg(u)
        return math.exp(-u * self.value)

    def laplace_ext(self, u: float) -> float:
        return math.exp(-u * self.value)

    def sample(self, rng: np.random.Generator) -> float:
        return self.value


JumpDist = Union[Exponential, Constant]


def _check_order(n):
    if int(n) != n or n < 1:
        raise DomainError(f"moment order must be a positive integer, got {n!r}")


def _check_laplace_arg(u):
    if not u >= 0:
        raise DomainError(f"Laplace transform argument must be >= 0, got {u!r}")


def laplace(d: JumpDist, u: float) -> float:
    """E[exp(-u X)] for ``X ~ d`` and ``u >= 0``."""
    return d.laplace(u)


def raw_moment(d: JumpDist, n: int) -> float:
    return d.raw_moment(n)


def sample(d: JumpDist, rng: np.random.Generator) -> float:
    return d.sample(rng)


def jump_from_dict(obj, field_name="jump") -> JumpDist:
    if not isinstance(obj, dict):
        raise ParameterError(field_name, "expected an object with keys 'kind' and 'param'")
    extra = set(obj) - {"kind", "param"}
    if extra:
        raise ParameterError(f"{field_name}.{sorted(extra)[0]}", "unknown key")
    for key in ("kind", "param"):
        if key not in obj:
            raise ParameterError(f"{field_name}.{key}", "missing")
    kind, param = obj["kind"], obj["param"]
    if not isinstance(param, (int, float)) or isinstance(param, bool):
        raise ParameterError(f"{field_name}.param", f"expected a number, got {param!r}")
    try:
        if kind == "exponential":
            return Exponential(float(param))
        if kind == "constant":
            return Constant(float(param))
    except ParameterError as exc:
        raise ParameterError(f"{field_name}.param", str(exc).split(": ", 1)[1]) from None
    raise ParameterError(f"{field_name}.kind", f"expected 'exponential' or 'constant', got {kind!r}")


def jump_to_dict(d: JumpDist) -> dict:
    return {"kind": d.kind, "param": d.param}


def _require(cond, name, message):
    if not cond:
        raise ParameterError(name, message)


def _finite(x):
    return isinstance(x, (int, float)) and math.isfinite(x)


@dataclass(frozen=True)
class ArrivalParams:
    """Hawkes arrivals: baseline ``lambda_star``, decay ``r``, initial ``lambda0``, jump law B."""

    lambda_star: float
    r: float
    lambda0: float
    jump: JumpDist = field(default_factory=lambda: Constant(0.0))

    def __post_init__(self):
        _require(_finite(self.r) and self.r > 0, "r", f"must be positive, got {self.r!r}")
        _require(_finite(self.lambda_star) and self.lambda_star >= 0, "lambda_star",
                 f"must be non-negative, got {self.lambda_star!r}")
        _require(_finite(self.lambda0) and self.lambda0 >= 0, "lambda0",
                 f"must be non-negative, got {self.lambda0!r}")

    @property
    def stable(self) -> bool:
        """Non-explosion condition E[B] < r."""
        return self.jump.mean < self.r


@dataclass(frozen=True)
class ServiceParams:
    """sdHawkes service: per-customer baseline ``mu_star``, decay ``s``, restart level ``mu0``, jump law C.

    ``reset_on_busy_period_start`` selects the restart rule: when True the
    service memory is cleared only when the system goes from empty to one
    customer; when False it is cleared whenever N becomes 1, departures included.
    """

    mu_star: float
    s: float
    mu0: float
    jump: JumpDist = field(default_factory=lambda: Constant(0.0))
    reset_on_busy_period_start: bool = True

    def __post_init__(self):
        _require(_finite(self.s) and self.s > 0, "s", f"must be positive, got {self.s!r}")
        _require(_finite(self.mu_star) and self.mu_star >= 0, "mu_star",
                 f"must be non-negative, got {self.mu_star!r}")
        _require(_finite(self.mu0) and self.mu0 >= 0, "mu0", f"must be non-negative, got {self.mu0!r}")


class ModelKind(enum.Enum):
    HAWKES_SDHAWKES = "hsd"
    M_SDHAWKES = "msd"
    HAWKES_M = "hm"
    MM = "mm"


def _is_off(d: JumpDist) -> bool:
    return isinstance(d, Constant) and d.value == 0.0


@dataclass(frozen=True)
class Model:
    """A full system specification: which queue and all of its parameters.

    For ``M_SDHAWKES`` the constant arrival rate is ``arrival.lambda0``; the
    arrival law must then be Poisson (no jumps, ``lambda_star == lambda0``).
    ``HAWKES_M`` and ``MM`` require memoryless service (no jumps, ``mu0 == mu_star``).
    """

    kind: ModelKind
    arrival: ArrivalParams
    service: ServiceParams

    def __post_init__(self):
        a, s = self.arrival, self.service
        if self.kind in (ModelKind.M_SDHAWKES, ModelKind.MM):
            _require(_is_off(a.jump), "arrival_jump", f"{self.kind.value} requires Poisson arrivals (constant 0)")
            _require(a.lambda_star == a.lambda0, "lambda_star",
                     f"{self.kind.value} requires lambda_star == lambda0 (constant arrival rate)")
            _require(a.lambda0 > 0, "lambda0", f"{self.kind.value} requires a positive arrival rate")
        if self.kind in (ModelKind.HAWKES_M, ModelKind.MM):
            _require(_is_off(s.jump), "service_jump", f"{self.kind.value} requires memoryless service (constant 0)")
            _require(s.mu0 == s.mu_star, "mu0", f"{self.kind.value} requires mu0 == mu_star")
            _require(s.mu_star > 0, "mu_star", f"{self.kind.value} requires a positive service rate")

    @property
    def arrival_rate(self) -> float:
        """Constant arrival rate of the M/* models."""
        return self.arrival.lambda0

    def with_service(self, **changes) -> "Model":
        from dataclasses import replace
        return replace(self, service=replace(self.service, **changes))

    def to_dict(self) -> dict:
        a, s = self.arrival, self.service
        return {
            "lambda_star": a.lambda_star,
            "r": a.r,
            "lambda0": a.lambda0,
            "arrival_jump": jump_to_dict(a.jump),
            "mu_star": s.mu_star,
            "s": s.s,
            "mu0": s.mu0,
            "service_jump": jump_to_dict(s.jump),
            "model": self.kind.value,
        }

    @classmethod
    def from_dict(cls, obj, reset_on_busy_period_start: bool = True) -> "Model":
        if not isinstance(obj, dict):
            raise ParameterError("params", "expected a JSON object")
        unknown = set(obj) - set(PARAM_KEYS)
        if unknown:
            raise ParameterError(sorted(unknown)[0], "unknown key")
        missing = [k for k in PARAM_KEYS if k not in obj]
        if missing:
            raise ParameterError(missing[0], "missing")
        for key in ("lambda_star", "r", "lambda0", "mu_star", "s", "mu0"):
            val = obj[key]
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ParameterError(key, f"expected a number, got {val!r}")
        try:
            kind = ModelKind(obj["model"])
        except ValueError:
            raise ParameterError("model", f"expected one of hsd, msd, hm, mm; got {obj['model']!r}") from None
        arrival = ArrivalParams(float(obj["lambda_star"]), float(obj["r"]), float(obj["lambda0"]),
                                jump_from_dict(obj["arrival_jump"], "arrival_jump"))
        service = ServiceParams(float(obj["mu_star"]), float(obj["s"]), float(obj["mu0"]),
                                jump_from_dict(obj["service_jump"], "service_jump"),
                                reset_on_busy_period_start)
        return cls(kind, arrival, service)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str, reset_on_busy_period_start: bool = True) -> "Model":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParameterError("params", f"malformed JSON ({exc.msg} at line {exc.lineno})") from None
        return cls.from_dict(obj, reset_on_busy_period_start)


PARAM_KEYS = ("lambda_star", "r", "lambda0", "arrival_jump", "mu_star", "s", "mu0", "service_jump", "model")

# Parameter values not fixed by the figure captions are filled as follows:
# mu0 = mu_star everywhere, lambda_star = lambda0 for fig3, and r / s set to 2
# where they do not influence the law of the process.
PRESETS = {
    "fig1": Model(
        ModelKind.HAWKES_SDHAWKES,
        ArrivalParams(lambda_star=2.0, r=2.0, lambda0=2.0, jump=Exponential(2.0)),
        ServiceParams(mu_star=2.0, s=2.0, mu0=2.0, jump=Exponential(2.0)),
    ),
    "fig2": Model(
        ModelKind.M_SDHAWKES,
        ArrivalParams(lambda_star=2.0, r=2.0, lambda0=2.0, jump=Constant(0.0)),
        ServiceParams(mu_star=2.0, s=2.0, mu0=2.0, jump=Exponential(2.0)),
    ),
    "fig3": Model(
        ModelKind.HAWKES_M,
        ArrivalParams(lambda_star=2.0, r=2.0, lambda0=2.0, jump=Exponential(2.0)),
        ServiceParams(mu_star=2.0, s=2.0, mu0=2.0, jump=Constant(0.0)),
    ),
    "mm-base": Model(
        ModelKind.MM,
        ArrivalParams(lambda_star=2.0, r=2.0, lambda0=2.0, jump=Constant(0.0)),
        ServiceParams(mu_star=2.0, s=2.0, mu0=2.0, jump=Constant(0.0)),
    ),
}


def preset(name: str) -> Model:
    try:
        return PRESETS[name]
    except KeyError:
        raise ParameterError("preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
