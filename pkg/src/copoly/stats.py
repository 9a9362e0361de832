"""Localization test, confidence intervals and the two-monomer quick check."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from statistics import NormalDist

import numpy as np
from scipy import integrate

from .model import BERNOULLI, ChargeLaw


@dataclass
class Sample:
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size == 0:
            raise ValueError("empty sample")

    def __len__(self) -> int:
        return self.values.size


class Direction(str, enum.Enum):
    UPPER = "upper"  # H0: E log Z <= 0, rejected when the mean is positive
    LOWER = "lower"  # H0: E log Z > 0, rejected when the mean is negative


class Verdict(str, enum.Enum):
    REJECT = "reject_H0"
    CANNOT_REJECT = "cannot_reject"


@dataclass
class TestReport:
    u_hat: float
    p_value_bound: float
    verdict: Verdict
    direction: Direction
    n: int
    lam: float
    system_size: int
    ci99: tuple[float, float] | None = None
    rigorous: bool = True
    meta: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    @property
    def localized(self) -> bool:
        return self.verdict is Verdict.REJECT and self.direction is Direction.UPPER

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict.value
        d["direction"] = self.direction.value
        d["ci99"] = list(self.ci99) if self.ci99 else None
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "TestReport":
        d = dict(d)
        d["verdict"] = Verdict(d["verdict"])
        d["direction"] = Direction(d["direction"])
        d["ci99"] = tuple(d["ci99"]) if d.get("ci99") else None
        return cls(**d)

    def summary(self) -> str:
        tail = "E log Z > 0" if self.direction is Direction.UPPER else "E log Z < 0"
        ci = f" ci99=[{self.ci99[0]:.6g}, {self.ci99[1]:.6g}]" if self.ci99 else ""
        note = "" if self.rigorous else " (bound not rigorous for these charges)"
        return (f"{self.verdict.value}: {tail}, u_hat={self.u_hat:.6g}, n={self.n}, "
                f"size={self.system_size}, p<={self.p_value_bound:.3g}{ci}{note}")


def p_value_bound(u_hat: float, n: int, lam: float, system_size: int) -> float:
    """exp(-u^2 n / (16 lam^2 size)); ``system_size`` is the number of charges used."""
    return math.exp(-(u_hat * u_hat) * n / (16.0 * lam * lam * system_size))


def localization_test(sample: Sample | np.ndarray, lam: float, system_size: int,
                      direction: Direction | str = Direction.UPPER,
                      law: ChargeLaw | str | None = None) -> TestReport:
    """Concentration test on a sample of log Z_size(0).

    Under H0 the sample mean deviates from E log Z by u with probability at
    most exp(-u^2 n / (16 lam^2 size)), log Z(0) being (2 lam sqrt(size))-
    Lipschitz in the charges.  The constant is derived for +-1 charges;
    Gaussian samples get the same number with ``rigorous=False``.
    """
    if not isinstance(sample, Sample):
        sample = Sample(sample)
    if not lam > 0:
        raise ValueError("lambda must be > 0")
    if system_size <= 0:
        raise ValueError("system size must be positive")
    direction = Direction(direction)
    x = sample.values
    n = x.size
    u = float(np.mean(x))
    rejecting = u > 0 if direction is Direction.UPPER else u < 0
    if rejecting:
        p, verdict = p_value_bound(u, n, lam, system_size), Verdict.REJECT
    else:
        p, verdict = 1.0, Verdict.CANNOT_REJECT
    ci = None
    if n >= 2:
        half = NormalDist().inv_cdf(0.995) * float(np.std(x, ddof=1)) / math.sqrt(n)
        ci = (u - half, u + half)
    if law is None:
        law = sample.meta.get("law", BERNOULLI)
    rigorous = ChargeLaw.parse(law) is BERNOULLI
    return TestReport(u, p, verdict, direction, n, float(lam), int(system_size), ci, rigorous,
                      dict(sample.meta))


def median_ci(sample: Sample | np.ndarray, confidence: float = 0.95) -> tuple[float, float]:
    """Order-statistic interval for the median, ranks floor((1/2 -+ a/(2 sqrt n)) n)."""
    values = sample.values if isinstance(sample, Sample) else np.asarray(sample, dtype=float)
    n = values.size
    if n < 100:
        raise ValueError(f"median_ci needs at least 100 observations, got {n}")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    a = abs(NormalDist().inv_cdf((1.0 - confidence) / 2.0))
    ys = np.sort(values)
    half = a / (2.0 * math.sqrt(n))
    lo = min(max(math.floor((0.5 - half) * n), 1), n)
    hi = min(max(math.floor((0.5 + half) * n), 1), n)
    return float(ys[lo - 1]), float(ys[hi - 1])


def _log_half_one_plus_exp(t):
    # log((1 + exp(t)) / 2), overflow-safe
    return np.logaddexp(0.0, t) - math.log(2.0)


def quick_check_N1(law: ChargeLaw | str, lam: float, h: float, conditioned: bool = True) -> float:
    """E log(1/2 + 1/2 exp(-2 lam (w1 + w2 + 2h))).

    A positive value certifies localization.  With ``conditioned=False`` the
    unconditioned two-monomer value E log Z_2(0) is returned instead, which is
    smaller by log 2.
    """
    law = ChargeLaw.parse(law)
    if law is BERNOULLI:
        s = np.array([-2.0, 0.0, 0.0, 2.0])
        value = float(np.mean(_log_half_one_plus_exp(-2.0 * lam * (s + 2.0 * h))))
    elif lam == 0:
        value = 0.0
    else:
        # w1 + w2 ~ N(0, 2); the integrand has a kink at s = -2h for large lam
        sd = math.sqrt(2.0)
        dens = NormalDist(0.0, sd)

        def f(s):
            return float(_log_half_one_plus_exp(-2.0 * lam * (s + 2.0 * h))) * dens.pdf(s)

        kink = -2.0 * h
        left, _ = integrate.quad(f, -np.inf, kink, epsabs=1e-13, epsrel=1e-12, limit=200)
        right, _ = integrate.quad(f, kink, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
        value = left + right
    return value if conditioned else value - math.log(2.0)
