"""Delocalization diagnostics and critical-curve estimation.

* ``meander_distance``: l1 distance between the endpoint law of the polymer
  (charges read backwards) and the discretized Brownian-meander density.
* ``estimate_h_hat`` / ``fit_m``: the h solving Z_N(0) = 1, and the member of
  the family h^(m) that matches it.
* ``checkpoint_growth_scan`` and ``stretch_certificate``: growth traces and the
  atypical-stretch localization certificate.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize

from . import engine
from .disorder import Environment, StretchRecord, find_T, reverse, saturation_level
from .engine import DEFAULT_WINDOW, Window
from .model import GAUSSIAN, ChargeLaw, PolymerParams, cramer_rate, h_m, log_mgf, optimal_q


def meander_density(x):
    """x exp(-x^2/2) on x >= 0, zero elsewhere."""
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0, x * np.exp(-0.5 * x * x), 0.0)


def meander_target(N: int, M: int | None = None) -> np.ndarray:
    """Meander mass at endpoints x = 2y, y = -M..M, for a polymer of N monomers.

    S_N / sqrt(N) has the meander density and x lives on a lattice of
    spacing 2, so the mass at x is (2 / sqrt(N)) phi+(x / sqrt(N)).
    """
    if M is None:
        M = N // 2
    x = 2.0 * np.arange(-M, M + 1)
    s = math.sqrt(N)
    return (2.0 / s) * meander_density(x / s)


@dataclass
class MeanderDistanceResult:
    distance: float
    system_size: int
    params: PolymerParams
    env_id: tuple[int, int]


def meander_distance(env: Environment, params: PolymerParams, N: int,
                     window: Window | None = DEFAULT_WINDOW) -> MeanderDistanceResult:
    """l1 distance of P(S_N = x) under the backward environment to the meander."""
    back = reverse(env, N)
    res = engine.sweep(back, params, N, window=window, want_profile=True)
    p = res.profile.endpoint_law()
    t = meander_target(N, res.profile.M)
    return MeanderDistanceResult(float(np.abs(p - t).sum()), N, params, env.env_id)


# --- critical curve -------------------------------------------------------------

class BracketError(ValueError):
    """The bisection bracket does not straddle a root."""


@dataclass
class CriticalCurvePoint:
    lam: float
    h_hat: float
    N: int
    env_id: tuple[int, int]
    bisection_width: float
    saturated: bool = False
    h_sat: float = math.inf


MAX_BISECTIONS = 60


def default_bracket(law: ChargeLaw, h_sat: float) -> tuple[float, float]:
    if ChargeLaw.parse(law) is GAUSSIAN:
        return 0.0, min(h_sat, 2.0)
    return 0.0, min(h_sat, 1.0)


def estimate_h_hat(env: Environment, lam: float, N: int, tol: float = 1e-6,
                   h_bracket: tuple[float, float] | None = None,
                   window: Window | None = DEFAULT_WINDOW) -> CriticalCurvePoint:
    """Bisection for the h where log Z_N(0) changes sign (Z_N(0) decreases in h)."""
    if not lam > 0:
        raise BracketError("no root at lambda = 0: Z_N(0) <= 1/2 for every h")
    engine._check_size(env, N)
    h_sat = saturation_level(env, N)
    lo, hi = h_bracket if h_bracket is not None else default_bracket(env.law, h_sat)
    # Z_N(0) < 1 for every h >= h_sat, whatever lambda
    hi = min(hi, h_sat)
    if not lo < hi:
        raise BracketError(f"empty bracket [{lo}, {hi}]")
    alpha_cache = np.asarray(env.charges[:N], dtype=float)

    def logz(h: float) -> float:
        alpha = engine.pair_weights(alpha_cache, lam, h)
        return engine.run_transfer(alpha, N, window).pinned_log

    if not logz(lo) > 0:
        raise BracketError(f"log Z(0) <= 0 at the lower end h={lo}")
    if not logz(hi) < 0:
        raise BracketError(f"log Z(0) >= 0 at the upper end h={hi}")
    for _ in range(MAX_BISECTIONS):
        if hi - lo < tol:
            break
        mid = 0.5 * (lo + hi)
        if logz(mid) > 0:
            lo = mid
        else:
            hi = mid
    h_hat = 0.5 * (lo + hi)
    width = 0.5 * (hi - lo)
    saturated = h_sat - h_hat <= max(10 * tol, 2 * width)
    return CriticalCurvePoint(lam, h_hat, N, env.env_id, width, saturated, h_sat)


def certify_point(env: Environment, point: CriticalCurvePoint,
                  window: Window | None = DEFAULT_WINDOW) -> tuple[float, float]:
    """log Z_N(0) at h_hat - width and h_hat + width (expected > 0 and < 0)."""
    def logz(h):
        return engine.sweep(env, PolymerParams(point.lam, h, env.law), point.N, window).pinned_log

    return logz(point.h_hat - point.bisection_width), logz(point.h_hat + point.bisection_width)


class FitCriterion(str, enum.Enum):
    ANCHOR = "anchor"
    MAX_RATIO = "max_ratio"


@dataclass
class MFit:
    m: float
    criterion: FitCriterion
    relative_errors: list[tuple[float, float]] = field(default_factory=list)


def relative_errors(points: Iterable[CriticalCurvePoint], law: ChargeLaw, m: float) -> list[tuple[float, float]]:
    """r(lam) = (h^(m)(lam) - h_hat(lam)) / h_hat(lam)."""
    return [(p.lam, (h_m(law, m, p.lam) - p.h_hat) / p.h_hat) for p in points]


def fit_m(points: Sequence[CriticalCurvePoint], law: ChargeLaw | str,
          criterion: FitCriterion | str = FitCriterion.ANCHOR, anchor: float | None = None) -> MFit:
    """Choose m so that h^(m) matches the estimated curve.

    ``anchor``: solve h^(m)(anchor) = h_hat(anchor) for m in (0, 2].
    ``max_ratio``: m = max h_hat / lam (exact for Gaussian charges, h^(m) = m lam).
    """
    if not points:
        raise ValueError("no points to fit")
    law = ChargeLaw.parse(law)
    criterion = FitCriterion(criterion)
    if criterion is FitCriterion.MAX_RATIO:
        m = max(p.h_hat / p.lam for p in points)
    else:
        if anchor is None:
            if len(points) != 1:
                raise ValueError("anchor lambda required")
            anchor = points[0].lam
        matches = [p for p in points if math.isclose(p.lam, anchor, rel_tol=1e-12)]
        if not matches:
            raise ValueError(f"no point at the anchor lambda={anchor}")
        target = matches[0].h_hat

        def gap(m):
            return h_m(law, m, anchor) - target

        lo, hi = 1e-9, 2.0
        if gap(lo) * gap(hi) > 0:
            raise ValueError(f"h^(m)({anchor}) = {target} has no root for m in (0, 2]")
        m = optimize.brentq(gap, lo, hi, xtol=1e-14, rtol=1e-14)
    return MFit(float(m), criterion, relative_errors(points, law, m))


def critical_curve(env: Environment, lams: Sequence[float], N: int, tol: float = 1e-6,
                   window: Window | None = DEFAULT_WINDOW) -> list[CriticalCurvePoint]:
    return [estimate_h_hat(env, lam, N, tol, window=window) for lam in lams]


# --- growth traces and stretches ----------------------------------------------------

SPIKE_THRESHOLD = 2.0


@dataclass
class GrowthScan:
    trace: list[tuple[int, float]]
    free_trace: list[tuple[int, float]]
    spike_statistic: float
    spike_flag: bool

    @property
    def sizes(self) -> np.ndarray:
        return np.array([n for n, _ in self.trace])

    @property
    def log_z0(self) -> np.ndarray:
        return np.array([v for _, v in self.trace])


def log_grid(n_min: int, n_max: int, points: int) -> list[int]:
    """Even sizes, roughly log-spaced between n_min and n_max."""
    raw = np.geomspace(max(n_min, 2), n_max, points)
    return sorted({int(2 * round(v / 2)) for v in raw if 2 <= 2 * round(v / 2) <= n_max})


def checkpoint_growth_scan(env: Environment, params: PolymerParams, N_max: int,
                           grid: Sequence[int], window: Window | None = None) -> GrowthScan:
    """One sweep, recording log Z(0) on ``grid``; flags spikes of log Z(0) + (1/2) log N."""
    if any(g % 2 or g <= 0 or g > N_max for g in grid):
        raise ValueError("grid must contain even sizes in (0, N_max]")
    res = engine.sweep(env, params, N_max, window=window, checkpoints=grid)
    sizes = np.array([n for n, _ in res.trace], dtype=float)
    vals = np.array([v for _, v in res.trace])
    compensated = vals + 0.5 * np.log(sizes)
    stat = float(np.max(compensated) - np.median(compensated)) if len(vals) else 0.0
    return GrowthScan(res.trace, res.free_trace, stat, stat > SPIKE_THRESHOLD)


# 1 / (2 sqrt(pi)) = inf_n n^{3/2} K(2n), the limit of the decreasing sequence
_K_CONSTANT = 0.5 / math.sqrt(math.pi)
LOG_C_PRIME = math.log(_K_CONSTANT ** 2 / (8.0 * math.sqrt(2.0)))


def bound_exponent(law: ChargeLaw, lam: float, h: float, A: int, epsilon: float,
                   q: float | None = None) -> float:
    """(3/2) A [(-4 lam/3) q - Sigma(q) - (4 lam/3) h - log(A)/A - eps].

    At the optimal q the first two terms equal log M(-4 lam/3).
    """
    a = 4.0 * lam / 3.0
    if q is None:
        gain = log_mgf(law, -a)
    else:
        gain = -a * q - cramer_rate(law, q)
    return 1.5 * A * (gain - a * h - math.log(A) / A - epsilon)


@dataclass
class StretchCertificate:
    record: StretchRecord
    log_z_T: float | None
    exponent: float
    log_bound: float
    extension: list[tuple[int, float]] = field(default_factory=list)
    free_extension: list[tuple[int, float]] = field(default_factory=list)

    @property
    def censored(self) -> bool:
        return self.record.censored

    @property
    def T(self) -> int | None:
        return self.record.T

    @property
    def certified(self) -> bool:
        """Z_T(0) > 1 measured: T bounds T^C for C = Z_T(0)."""
        return self.log_z_T is not None and self.log_z_T > 0


def stretch_certificate(env: Environment, params: PolymerParams, A: int, epsilon: float,
                        cap: int, q: float | None = None, extend: int = 0,
                        extend_points: int = 40,
                        window: Window | None = DEFAULT_WINDOW) -> StretchCertificate:
    """Locate T = tau_ell and compare log Z_T(0) with the analytic lower bound.

    With ``extend`` > 0 the sweep continues to T + extend and records the
    pinned and free traces there, showing how the stretch's gain decays.
    """
    lam = params.lam
    q_used = optimal_q(env.law, lam) if q is None else q
    exponent = bound_exponent(env.law, lam, params.h, A, epsilon, q_used)
    record = find_T(env, q_used, A, epsilon, cap)
    if record.censored:
        return StretchCertificate(record, None, exponent, LOG_C_PRIME + exponent)
    T = record.T
    end = min(T + extend, len(env.charges) - len(env.charges) % 2)
    grid = [T]
    if end > T:
        grid += [T + d for d in log_grid(2, end - T, extend_points)]
    res = engine.sweep(env, params, end, window=window, checkpoints=grid)
    log_z_T = res.trace[0][1]
    return StretchCertificate(record, log_z_T, exponent, LOG_C_PRIME + exponent,
                              res.trace[1:], res.free_trace[1:])
