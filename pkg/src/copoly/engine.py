"""Transfer-matrix computation of the copolymer partition functions.

The profile ``Z[y] = Z_{2M}(2y)`` is advanced two monomers at a time: for
y > 0 the walk sits in the upper half-plane and the update is the plain
two-step heat kernel (1/4, 1/2, 1/4); for y < 0 the same kernel is multiplied
by ``alpha = exp(-2 lam (w_{2M+1} + w_{2M+2} + 2h))``; the y = 0 site mixes
both (the sign(0) convention makes a return to zero inherit the sign of the
previous step).  Values are kept in linear scale with a shared log factor.

Besides the sweep this module carries two test oracles (path enumeration and
the excursion decomposition), the super-additivity and pinned-product
helpers and the lambda -> infinity limit model for binary charges.
"""
from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numba
import numpy as np

from .model import BERNOULLI, ChargeLaw, PolymerParams


class Window(NamedTuple):
    """Height window: after time N0 only paths with -A sqrt(M) <= y <= B sqrt(M) are kept."""

    A: float
    B: float
    N0: int


DEFAULT_WINDOW = Window(3.0, 8.0, 1000)

_NO_WINDOW = (0.0, 0.0, 0, False)


class NumericalError(FloatingPointError):
    """Raised when a sweep produces non-finite values."""


@dataclass
class PartitionProfile:
    """Endpoint profile ``values[y + M] * exp(log_scale) == Z_{2M}(2y)``."""

    values: np.ndarray
    log_scale: float
    M: int
    window: Window | None = None

    @property
    def heights(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    def log_value(self, x: int) -> float:
        """log Z_{2M}(x) for an endpoint x (odd x is exactly zero)."""
        if x % 2 or abs(x) > 2 * self.M:
            return -math.inf
        v = self.values[x // 2 + self.M]
        return math.log(v) + self.log_scale if v > 0 else -math.inf

    def value(self, x: int) -> float:
        return math.exp(self.log_value(x))

    def log_total(self) -> float:
        return math.log(self.values.sum()) + self.log_scale

    def endpoint_law(self) -> np.ndarray:
        """P(S_{2M} = 2y) for y = -M..M under the polymer measure."""
        return self.values / self.values.sum()

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("height,value,log_scale\n")
            for y, v in zip(self.heights, self.values):
                fh.write(f"{y},{v:.17g},{self.log_scale:.17g}\n")

    _HEADER = struct.Struct("<4sQdddq")

    def to_bytes(self) -> bytes:
        A, B, N0 = self.window if self.window else (math.nan, math.nan, -1)
        head = self._HEADER.pack(b"CPPF", self.M, self.log_scale, A, B, N0)
        return head + np.asarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "PartitionProfile":
        magic, M, log_scale, A, B, N0 = cls._HEADER.unpack_from(blob)
        if magic != b"CPPF":
            raise ValueError("not a profile dump")
        values = np.frombuffer(blob, dtype="<f8", offset=cls._HEADER.size).copy()
        if values.size != 2 * M + 1:
            raise ValueError("truncated profile dump")
        window = None if N0 < 0 else Window(A, B, int(N0))
        return cls(values, log_scale, M, window)


@dataclass
class SweepResult:
    pinned_log: float
    free_log: float
    N: int
    profile: PartitionProfile | None = None
    trace: list[tuple[int, float]] = field(default_factory=list)
    free_trace: list[tuple[int, float]] = field(default_factory=list)
    ops: int = 0
    stopped: bool = False

    def write_trace_csv(self, path) -> None:
        write_trace_csv(path, self.trace)


def write_trace_csv(path, trace: Sequence[tuple[int, float]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("N,logZ0\n")
        for n, v in trace:
            fh.write(f"{n},{v:.17g}\n")


@numba.njit(nogil=True, cache=True)
def _transfer(alpha, nsteps, wa, wb, n0, windowed, renorm, ckpt, stop_log):
    off = nsteps + 2
    src = np.zeros(2 * off + 1)
    dst = np.zeros(2 * off + 1)
    src[off] = 1.0
    slo = 0
    shi = 0
    dlo = 0
    dhi = 0
    logs = 0.0
    ops = 0
    lo_thr = 1.0 / renorm
    nck = ckpt.shape[0]
    trace = np.empty(nck)
    ftrace = np.empty(nck)
    ic = 0
    done = 0
    stopped = False
    smax = 1.0
    for M in range(nsteps):
        a = alpha[M]
        if a * smax > 1e300:
            # a single huge pair weight: rescale first so the step cannot overflow
            s = 1.0 / smax
            for y in range(slo, shi + 1):
                src[off + y] *= s
            logs += math.log(smax)
            smax = 1.0
        lo = -(M + 1)
        hi = M + 1
        if windowed and 2 * M >= n0:
            r = math.sqrt(M)
            wl = -int(math.floor(wa * r))
            wh = int(math.floor(wb * r))
            if wl > lo:
                lo = wl
            if wh < hi:
                hi = wh
        for y in range(dlo, lo):
            dst[off + y] = 0.0
        for y in range(hi + 1, dhi + 1):
            dst[off + y] = 0.0
        mx = 0.0
        for y in range(lo, min(hi, -1) + 1):
            i = off + y
            v = a * (0.25 * src[i + 1] + 0.5 * src[i] + 0.25 * src[i - 1])
            if v < 1e-290:
                v = 0.0
            dst[i] = v
            if v > mx:
                mx = v
        if lo <= 0 <= hi:
            v = 0.25 * (src[off + 1] + src[off]) + 0.25 * a * (src[off] + src[off - 1])
            dst[off] = v
            if v > mx:
                mx = v
        for y in range(max(lo, 1), hi + 1):
            i = off + y
            v = 0.25 * src[i + 1] + 0.5 * src[i] + 0.25 * src[i - 1]
            if v < 1e-290:
                v = 0.0
            dst[i] = v
            if v > mx:
                mx = v
        ops += hi - lo + 1
        dlo = lo
        dhi = hi
        if not (mx < math.inf):
            return -math.inf, -math.inf, M, ops, trace[:ic], ftrace[:ic], src, 0.0, False, True
        if mx > renorm or mx < lo_thr:
            if mx == 0.0:
                return -math.inf, -math.inf, M, ops, trace[:ic], ftrace[:ic], src, 0.0, False, True
            s = 1.0 / mx
            for y in range(lo, hi + 1):
                dst[off + y] *= s
            logs += math.log(mx)
            mx = 1.0
        smax = mx
        tmp = src
        src = dst
        dst = tmp
        t0 = slo
        t1 = shi
        slo = dlo
        shi = dhi
        dlo = t0
        dhi = t1
        done = M + 1
        if ic < nck and ckpt[ic] == 2 * done:
            z0 = src[off]
            trace[ic] = (math.log(z0) if z0 > 0 else -math.inf) + logs
            tot = 0.0
            for y in range(slo, shi + 1):
                tot += src[off + y]
            ftrace[ic] = math.log(tot) + logs
            ic += 1
        if stop_log < math.inf and src[off] > 0 and math.log(src[off]) + logs >= stop_log:
            stopped = True
            break
    z0 = src[off]
    pinned = (math.log(z0) if z0 > 0 else -math.inf) + logs
    tot = 0.0
    for y in range(slo, shi + 1):
        tot += src[off + y]
    free = math.log(tot) + logs
    prof = src[off - done: off + done + 1].copy()
    return pinned, free, done, ops, trace[:ic], ftrace[:ic], prof, logs, stopped, False


def pair_weights(charges: np.ndarray, lam: float, h: float) -> np.ndarray:
    """alpha_M = exp(-2 lam (w_{2M+1} + w_{2M+2} + 2h)) for each charge pair."""
    w = np.asarray(charges, dtype=float)
    with np.errstate(over="ignore"):
        alpha = np.exp(-2.0 * lam * (w[0::2] + w[1::2] + 2.0 * h))
    if not np.all(np.isfinite(alpha)):
        raise NumericalError("pair weight overflow; lambda too large for these charges")
    return alpha


def _check_size(env, N: int) -> None:
    if N < 0 or N % 2:
        raise ValueError(f"system size must be even and non-negative, got {N}")
    if N > len(env.charges):
        raise ValueError(f"system size {N} exceeds environment length {len(env.charges)}")


def run_transfer(
    alpha: np.ndarray,
    N: int,
    window: Window | None = None,
    want_profile: bool = False,
    checkpoints: Sequence[int] | None = None,
    renorm: float = 1e100,
    stop_log: float = math.inf,
) -> SweepResult:
    """Run the recurrence on precomputed pair weights (length >= N/2)."""
    nsteps = N // 2
    alpha = np.ascontiguousarray(alpha[:nsteps], dtype=float)
    ck = np.array(sorted({int(c) for c in checkpoints or () if 0 < c <= N}), dtype=np.int64)
    if np.any(ck % 2):
        raise ValueError("checkpoints must be even system sizes")
    wa, wb, n0, windowed = (*window, True) if window is not None else _NO_WINDOW
    (pinned, free, done, ops, tr, ftr, prof, logs, stopped, failed) = _transfer(
        alpha, nsteps, float(wa), float(wb), int(n0), windowed, float(renorm), ck, float(stop_log)
    )
    if failed or not math.isfinite(free):
        raise NumericalError(f"non-finite partition values after {done} double steps")
    profile = PartitionProfile(prof, logs, done, window) if want_profile else None
    trace = [(int(n), float(v)) for n, v in zip(ck[: len(tr)], tr)]
    ftrace = [(int(n), float(v)) for n, v in zip(ck[: len(ftr)], ftr)]
    return SweepResult(pinned, free, 2 * done, profile, trace, ftrace, int(ops), bool(stopped))


def sweep(
    env,
    params: PolymerParams,
    N: int,
    window: Window | None = None,
    want_profile: bool = False,
    checkpoints: Sequence[int] | None = None,
    renorm: float = 1e100,
) -> SweepResult:
    """log Z_N(0) and log Z_N for the first N charges of ``env``.

    With a ``window`` the result is a lower bound (paths leaving the height
    window after time N0 are dropped).  ``checkpoints`` are even sizes at
    which log Z(0) (``trace``) and log Z (``free_trace``) are recorded.
    """
    _check_size(env, N)
    alpha = pair_weights(env.charges[:N], params.lam, params.h)
    return run_transfer(alpha, N, window, want_profile, checkpoints, renorm)


def first_crossing(env, params: PolymerParams, log_c: float, cap: int,
                   window: Window | None = None) -> SweepResult:
    """Sweep until log Z_N(0) >= log_c; ``stopped`` tells whether it happened."""
    _check_size(env, cap)
    alpha = pair_weights(env.charges[:cap], params.lam, params.h)
    return run_transfer(alpha, cap, window, stop_log=log_c)


def limit_model_weights(charges: np.ndarray, m: float) -> np.ndarray:
    w = np.asarray(charges, dtype=float)
    both_negative = (w[0::2] < 0) & (w[1::2] < 0)
    return np.where(both_negative, 2.0 ** (2.0 / m), 0.0)


def limit_model_sweep(env, m: float, N: int, window: Window | None = None,
                      want_profile: bool = False, checkpoints=None) -> SweepResult:
    """Sweep of the lambda -> infinity model along h = h^(m)(lambda).

    Positive charges are forbidden below the axis; each negative charge below
    the axis contributes 2**(1/m).
    """
    if ChargeLaw.parse(env.law) is not BERNOULLI:
        raise ValueError("the limit model is defined for binary charges only")
    if not m > 0:
        raise ValueError("m must be > 0")
    _check_size(env, N)
    alpha = limit_model_weights(env.charges[:N], m)
    return run_transfer(alpha, N, window, want_profile, checkpoints)


def superadd_check(env, params: PolymerParams, N: int, M: int) -> tuple[float, float]:
    """(log Z_{N+M}(0), log Z_N(0) + log Z_{M, shifted by N}(0)); N, M are block lengths."""
    if N % 2 or M % 2 or N < 0 or M < 0:
        raise ValueError("block lengths must be even and non-negative")
    _check_size(env, N + M)
    alpha = pair_weights(env.charges[: N + M], params.lam, params.h)
    lhs = run_transfer(alpha, N + M).pinned_log
    left = run_transfer(alpha, N).pinned_log
    right = run_transfer(alpha[N // 2:], M).pinned_log
    return lhs, left + right


def pinned_product_lower_bound(env, params: PolymerParams, pin_times: Sequence[int], N: int) -> float:
    """log of the partition function forced through zero at every pin time."""
    _check_size(env, N)
    prev = 0
    for t in pin_times:
        if t % 2 or t <= prev or t > N:
            raise ValueError("pin times must be even, strictly increasing and within (0, N]")
        prev = t
    alpha = pair_weights(env.charges[:N], params.lam, params.h)
    edges = [0, *pin_times]
    if edges[-1] != N:
        edges.append(N)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += run_transfer(alpha[a // 2:], b - a).pinned_log
    return total


# --- oracles -----------------------------------------------------------------

BRUTE_FORCE_MAX = 20
EXCURSION_MAX = 32


def path_deltas(N: int, chunk: int = 1 << 16):
    """Yield (endpoints, Delta) blocks over all 2**N simple-walk paths.

    ``Delta[p, n]`` is 1 when monomer n+1 of path p lies below the axis,
    with sign(S_n) := sign(S_{n-1}) whenever S_n = 0.
    """
    total = 1 << N
    for start in range(0, total, chunk):
        ids = np.arange(start, min(total, start + chunk), dtype=np.int64)
        bits = (ids[:, None] >> np.arange(N, dtype=np.int64)) & 1
        S = np.cumsum(2 * bits - 1, axis=1, dtype=np.int64)
        sgn = np.sign(S)
        for n in range(1, N):
            zero = sgn[:, n] == 0
            sgn[zero, n] = sgn[zero, n - 1]
        yield S[:, -1], (sgn < 0).astype(float)


def brute_force(env, params: PolymerParams, N: int, endpoint: int | None = None) -> float:
    """Z_N (or Z_N(endpoint)) by summing over all 2**N paths."""
    if N > BRUTE_FORCE_MAX:
        raise ValueError(f"brute force is capped at N={BRUTE_FORCE_MAX}")
    _check_size(env, N)
    if N == 0:
        return 1.0 if endpoint in (None, 0) else 0.0
    w = np.asarray(env.charges[:N], dtype=float) + params.h
    total = 0.0
    for ends, delta in path_deltas(N):
        weights = np.exp(-2.0 * params.lam * (delta @ w))
        if endpoint is not None:
            weights = weights[ends == endpoint]
        total += weights.sum()
    return total / 2.0 ** N


def first_return_law(nmax: int) -> list[Fraction]:
    """K(2n) = P(first return to 0 at time 2n) for n = 0..nmax (K(0) = 0).

    Obtained from the renewal identity u(2n) = sum_k K(2k) u(2n - 2k) with
    u(2n) = C(2n, n) / 4**n.
    """
    u = [Fraction(math.comb(2 * n, n), 4 ** n) for n in range(nmax + 1)]
    K = [Fraction(0)] * (nmax + 1)
    for n in range(1, nmax + 1):
        K[n] = u[n] - sum(K[k] * u[n - k] for k in range(1, n))
    return K


def excursion_oracle(env, params: PolymerParams, N: int) -> float:
    """Z_N(0) as a sum over all return-time compositions of N."""
    if N > EXCURSION_MAX:
        raise ValueError(f"excursion oracle is capped at N={EXCURSION_MAX}")
    _check_size(env, N)
    if N == 0:
        return 1.0
    K = [float(k) for k in first_return_law(N // 2)]
    P = np.concatenate([[0.0], np.cumsum(np.asarray(env.charges[:N], dtype=float))])
    lam, h = params.lam, params.h

    def block(a: int, b: int) -> float:
        t = lam * (P[b] - P[a]) + lam * h * (b - a)
        return 0.5 * (1.0 + math.exp(-2.0 * t)) * K[(b - a) // 2]

    half = N // 2
    table = {(a, b): block(2 * a, 2 * b) for a in range(half) for b in range(a + 1, half + 1)}
    total = 0.0
    for cuts in itertools.product((False, True), repeat=half - 1):
        prod = 1.0
        last = 0
        for i, cut in enumerate(cuts, start=1):
            if cut:
                prod *= table[last, i]
                last = i
        total += prod * table[last, half]
    return total
