"""Charge laws, their moment generating functions and the bound curves h^(m).

Only two centred, unit-variance laws are supported: symmetric Bernoulli
(+1/-1 with probability 1/2) and the standard Gaussian.  Everything here is
closed form; generic Legendre transforms live in the test-suite as oracles.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class ChargeLaw(enum.Enum):
    BERNOULLI = "bernoulli"
    GAUSSIAN = "gaussian"

    @classmethod
    def parse(cls, value: "ChargeLaw | str") -> "ChargeLaw":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {
            "bernoulli": cls.BERNOULLI,
            "binary": cls.BERNOULLI,
            "bernoullisymmetric": cls.BERNOULLI,
            "gaussian": cls.GAUSSIAN,
            "normal": cls.GAUSSIAN,
            "standardgaussian": cls.GAUSSIAN,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown charge law {value!r}") from None

    @property
    def tag(self) -> int:
        return 0 if self is ChargeLaw.BERNOULLI else 1

    @classmethod
    def from_tag(cls, tag: int) -> "ChargeLaw":
        return (cls.BERNOULLI, cls.GAUSSIAN)[tag]


BERNOULLI = ChargeLaw.BERNOULLI
GAUSSIAN = ChargeLaw.GAUSSIAN


@dataclass(frozen=True)
class PolymerParams:
    """Coupling ``lam`` (lambda), bias ``h`` and the charge law."""

    lam: float
    h: float
    law: ChargeLaw = BERNOULLI

    def __post_init__(self):
        object.__setattr__(self, "law", ChargeLaw.parse(self.law))
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")
        if not (self.h >= 0 and math.isfinite(self.h)):
            raise ValueError(f"h must be finite and >= 0, got {self.h}")


def _log_cosh(x: float) -> float:
    # stable for large |x|
    ax = abs(x)
    return ax + math.log1p(math.exp(-2.0 * ax)) - math.log(2.0)


def log_mgf(law: ChargeLaw, alpha: float) -> float:
    """log E[exp(alpha * omega_1)]."""
    law = ChargeLaw.parse(law)
    if law is BERNOULLI:
        return _log_cosh(alpha)
    return 0.5 * alpha * alpha


def mgf(law: ChargeLaw, alpha: float) -> float:
    """E[exp(alpha * omega_1)]: cosh(alpha) or exp(alpha**2 / 2)."""
    return math.exp(log_mgf(law, alpha))


def h_m(law: ChargeLaw, m: float, lam: float) -> float:
    """The curve h^(m)(lam) = log M(-2 m lam) / (2 m lam).

    m = 2/3 is the lower bound on the critical curve, m = 1 the upper one.
    """
    if not m > 0:
        raise ValueError(f"m must be > 0, got {m}")
    if not lam > 0:
        raise ValueError("h_m is defined for lambda > 0 only")
    law = ChargeLaw.parse(law)
    if law is GAUSSIAN:
        return m * lam
    x = 2.0 * m * lam
    return log_mgf(law, -x) / x


def h_lower(law: ChargeLaw, lam: float) -> float:
    return h_m(law, 2.0 / 3.0, lam)


def h_upper(law: ChargeLaw, lam: float) -> float:
    return h_m(law, 1.0, lam)


def cramer_rate(law: ChargeLaw, q: float) -> float:
    """Cramér functional sup_a {a q - log M(a)}; may be +inf."""
    law = ChargeLaw.parse(law)
    if law is GAUSSIAN:
        return 0.5 * q * q
    aq = abs(q)
    if aq > 1.0:
        return math.inf
    if aq == 1.0:
        return math.log(2.0)
    return 0.5 * ((1.0 + q) * math.log1p(q) + (1.0 - q) * math.log1p(-q))


def optimal_q(law: ChargeLaw, lam: float) -> float:
    """Tilted mean q0 = M'(-4 lam / 3) / M(-4 lam / 3).

    At q0 the stretch exponent (-4 lam/3) q - Sigma(q) equals log M(-4 lam/3).
    """
    if not lam > 0:
        raise ValueError("optimal_q requires lambda > 0")
    law = ChargeLaw.parse(law)
    a = -4.0 * lam / 3.0
    if law is GAUSSIAN:
        return a
    return math.tanh(a)

