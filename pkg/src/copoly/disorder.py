"""Quenched environments and atypical-stretch stopping times.

Environments are keyed by ``(seed, sample_index)``: each pair seeds its own
Philox counter stream, so samples can be produced in any order or on any
worker and still be bit-identical.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numba
import numpy as np

from . import engine
from .model import BERNOULLI, ChargeLaw, PolymerParams, cramer_rate

_U64 = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class Environment:
    charges: np.ndarray
    law: ChargeLaw
    seed: int = 0
    sample_index: int = 0
    # set on views produced by reverse(); the reversed prefix length
    reversed_size: int | None = None
    offset: int = 0

    def __post_init__(self):
        object.__setattr__(self, "law", ChargeLaw.parse(self.law))
        if self.charges.flags.writeable and self.charges.base is None:
            self.charges.flags.writeable = False

    def __len__(self) -> int:
        return len(self.charges)

    @property
    def env_id(self) -> tuple[int, int]:
        return (self.seed, self.sample_index)

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(b"CPEV", self.law.tag, len(self.charges), self.seed, self.sample_index)
        return head + np.asarray(self.charges, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Environment":
        magic, tag, length, seed, idx = _HEADER.unpack_from(blob)
        if magic != b"CPEV":
            raise ValueError("not an environment file")
        charges = np.frombuffer(blob, dtype="<f8", count=length, offset=_HEADER.size).copy()
        return cls(charges, ChargeLaw.from_tag(tag), seed, idx)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Environment":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# law={self.law.value} seed={self.seed} sample_index={self.sample_index}\n")
            fh.write("index,charge\n")
            for i, w in enumerate(self.charges, start=1):
                fh.write(f"{i},{w:.17g}\n")

    @classmethod
    def from_csv(cls, path) -> "Environment":
        with open(path, encoding="utf-8") as fh:
            meta = dict(kv.split("=") for kv in fh.readline().lstrip("# ").split())
            data = np.loadtxt(fh, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 1].copy(), meta["law"], int(meta["seed"]), int(meta["sample_index"]))


_HEADER = struct.Struct("<4sBQQQ")


def generate(law: ChargeLaw | str, length: int, seed: int = 0, sample_index: int = 0) -> Environment:
    """IID charges of the given law, reproducible from (seed, sample_index)."""
    law = ChargeLaw.parse(law)
    if length <= 0 or length % 2:
        raise ValueError(f"environment length must be even and positive, got {length}")
    if not (0 <= seed <= _U64) or sample_index < 0:
        raise ValueError("seed must be a 64-bit unsigned integer and sample_index >= 0")
    rng = np.random.Generator(np.random.Philox(key=seed | (sample_index << 64)))
    if law is BERNOULLI:
        charges = 2.0 * rng.integers(0, 2, size=length, dtype=np.int8) - 1.0
    else:
        charges = rng.standard_normal(length)
    return Environment(charges, law, seed, sample_index)


def reverse(env: Environment, system_size: int) -> Environment:
    """View of the first ``system_size`` charges read backwards (no copy)."""
    if system_size > len(env.charges) or system_size < 0:
        raise ValueError(f"system size {system_size} exceeds environment length {len(env.charges)}")
    flag = None if env.reversed_size == system_size else system_size
    return Environment(env.charges[:system_size][::-1], env.law, env.seed, env.sample_index,
                       reversed_size=flag, offset=env.offset)


def shift(env: Environment, k: int) -> Environment:
    """The translated environment (theta^k omega)_n = omega_{n+k} (no copy)."""
    if k < 0 or k > len(env.charges):
        raise ValueError("shift out of range")
    return Environment(env.charges[k:], env.law, env.seed, env.sample_index,
                       reversed_size=env.reversed_size, offset=env.offset + k)


# --- atypical stretches -------------------------------------------------------

# ties (window average exactly q) count as atypical
STRETCH_TOL = 1e-8


@dataclass(frozen=True)
class StretchRecord:
    q: float
    M_or_A: int
    cap: int
    tau_M: int | None = None
    R_M: int | None = None
    epsilon: float | None = None
    ell: int | None = None
    T: int | None = None

    @property
    def censored(self) -> bool:
        if self.epsilon is None:
            return self.tau_M is None
        return self.T is None


@numba.njit(nogil=True, cache=True)
def _first_stretch(w, q, M, cap, tol):
    # Q_n = P_n - q n on even n; the condition at n is Q_n <= max_{j <= n-M} Q_j
    half = M // 2
    npairs = cap // 2
    Q = np.empty(npairs + 1)
    Q[0] = 0.0
    P = 0.0
    runmax = -math.inf
    for i in range(1, npairs + 1):
        P += w[2 * i - 2] + w[2 * i - 1]
        Q[i] = P - q * (2 * i)
        if i >= half:
            if Q[i - half] > runmax:
                runmax = Q[i - half]
            if Q[i] - runmax <= tol:
                j = i - half
                while Q[i] - Q[j] > tol:
                    j -= 1
                return 2 * i, 2 * (i - j)
    return -1, -1


def find_tau(env: Environment, q: float, M: int, cap: int) -> StretchRecord:
    """First even n <= cap ending a stretch of even length >= M with average <= q."""
    if M <= 0 or M % 2:
        raise ValueError("M must be a positive even integer")
    if cap > len(env.charges):
        raise ValueError(f"cap {cap} exceeds environment length {len(env.charges)}")
    w = np.ascontiguousarray(env.charges[:cap], dtype=float)
    tau, R = _first_stretch(w, float(q), int(M), int(cap), STRETCH_TOL)
    if tau < 0:
        return StretchRecord(q, M, cap)
    return StretchRecord(q, M, cap, tau_M=int(tau), R_M=int(R))


def find_T(env: Environment, q: float, A: int, epsilon: float, cap: int) -> StretchRecord:
    """ell = first k >= A with log(tau_k)/k <= Sigma(q) + epsilon, and T = tau_ell."""
    if A <= 0 or A % 2:
        raise ValueError("A must be a positive even integer")
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    threshold = cramer_rate(env.law, q) + epsilon
    k = A
    while k <= cap:
        rec = find_tau(env, q, k, cap)
        if rec.censored:
            # tau_k is non-decreasing in k: nothing larger fits either
            break
        if math.log(rec.tau_M) / k <= threshold:
            return StretchRecord(q, A, cap, rec.tau_M, rec.R_M, epsilon, k, rec.tau_M)
        k += 2
    return StretchRecord(q, A, cap, epsilon=epsilon)


@dataclass(frozen=True)
class CrossingTime:
    N: int | None
    log_Z0: float | None

    @property
    def censored(self) -> bool:
        return self.N is None


def detect_TC(env: Environment, params: PolymerParams, C: float, cap: int,
              window: engine.Window | None = None) -> CrossingTime:
    """T^C = first even N <= cap with Z_N(0) >= C (censored otherwise)."""
    if not C > 1:
        raise ValueError("C must be > 1")
    if cap % 2:
        raise ValueError("cap must be even")
    res = engine.first_crossing(env, params, math.log(C), cap, window)
    if not res.stopped:
        return CrossingTime(None, None)
    return CrossingTime(res.N, res.pinned_log)


def saturation_level(env: Environment, N: int) -> float:
    """h_sat = max over pairs of -(w_{2n-1} + w_{2n}) / 2 within the first N charges."""
    w = np.asarray(env.charges[:N], dtype=float)
    return float(np.max(-(w[0::2] + w[1::2]) / 2.0))
