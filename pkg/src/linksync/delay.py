"""Per-edge delayed communication: bounded time-varying delay profiles and
time-stamped signal histories with linear interpolation.

Every directed edge owns a profile d(t) confined to [0, bound] and a
history of the sender's position.  A receiver reads the sender's state at
``t - d(t)`` by interpolating the recorded samples; times before the first
record resolve to the first recorded value (constant pre-history).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

__all__ = [
    "DelayProfile",
    "History",
    "DelayChannel",
    "UncoveredLookback",
    "query_delayed",
]

PROFILE_KINDS = ("constant", "sinusoidal", "random-walk")
KIND_CODES = {"constant": 0, "sinusoidal": 1, "random-walk": 2}


class UncoveredLookback(ValueError):
    """A query fell outside the retained history window (integrator bug)."""


@njit(cache=True)
def _delay_at(kind: int, bound: float, omega: float, phase: float,
              walk: np.ndarray, walk_dt: float, t: float) -> float:
    """Scalar delay evaluation shared by the Python API and the compiled
    integrators.  kind: 0 constant, 1 sinusoidal, 2 random walk."""
    if kind == 0:
        return bound
    if kind == 1:
        return bound * (1.0 + np.sin(omega * t + phase)) * 0.5
    if t <= 0.0:
        return walk[0]
    idx = t / walk_dt
    i0 = int(idx)
    if i0 >= walk.shape[0] - 1:
        return walk[walk.shape[0] - 1]
    w = idx - i0
    return walk[i0] * (1.0 - w) + walk[i0 + 1] * w


_EMPTY_WALK = np.zeros(1)


@dataclass
class DelayProfile:
    """Time-varying delay d(t) confined to [0, bound] seconds.

    kinds:
      constant     d(t) = bound
      sinusoidal   d(t) = bound (1 + sin(2 pi frequency t + phase)) / 2
      random-walk  seeded Gaussian walk on a uniform grid, clipped to
                   [0, bound] and linearly interpolated between grid points

    Identical seeds reproduce identical delays bit for bit.
    """

    kind: str
    bound: float
    frequency: float = 1.0
    phase: float = 0.0
    step_std: float = 0.02
    grid: float = 0.01
    seed: int = 0
    _walk: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown delay profile kind {self.kind!r}")
        if self.bound < 0.0 or not math.isfinite(self.bound):
            raise ValueError("delay bound must be finite and non-negative")
        if self.kind == "sinusoidal" and not self.frequency > 0.0:
            raise ValueError("sinusoidal profile needs a positive frequency")
        if self.kind == "random-walk":
            if not self.grid > 0.0:
                raise ValueError("random-walk grid spacing must be positive")
            if self.step_std < 0.0:
                raise ValueError("random-walk step deviation must be non-negative")

    def walk_table(self, horizon: float) -> np.ndarray:
        """Walk values on the grid covering [0, horizon] (random-walk only)."""
        if self.kind != "random-walk":
            return _EMPTY_WALK
        need = int(math.ceil(horizon / self.grid)) + 2
        if self._walk is None or self._walk.shape[0] < need:
            rng = np.random.Generator(np.random.PCG64(self.seed))
            steps = rng.normal(0.0, self.step_std, size=need - 1)
            walk = np.empty(need)
            walk[0] = min(max(0.5 * self.bound, 0.0), self.bound)
            for k in range(1, need):
                v = walk[k - 1] + steps[k - 1]
                walk[k] = min(max(v, 0.0), self.bound)
            self._walk = walk
        return self._walk

    def delay(self, t: float) -> float:
        """Delay at time t; for every t >= 0 the value lies in [0, bound]."""
        walk = self.walk_table(max(t, 0.0)) if self.kind == "random-walk" else _EMPTY_WALK
        return float(
            _delay_at(
                KIND_CODES[self.kind], self.bound,
                2.0 * math.pi * self.frequency, self.phase,
                walk, self.grid, t,
            )
        )

    def delays(self, ts: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over an array of times; bit-identical to
        the scalar path."""
        ts = np.asarray(ts, dtype=float)
        if self.kind == "constant":
            return np.full(ts.shape, self.bound)
        if self.kind == "sinusoidal":
            return self.bound * (1.0 + np.sin(2.0 * math.pi * self.frequency * ts + self.phase)) * 0.5
        walk = self.walk_table(float(np.max(ts, initial=0.0)))
        idx = np.maximum(ts, 0.0) / self.grid
        i0 = np.minimum(idx.astype(np.int64), walk.shape[0] - 2)
        w = idx - i0
        out = walk[i0] * (1.0 - w) + walk[i0 + 1] * w
        return np.where(idx >= walk.shape[0] - 1, walk[-1], out)


def edge_phase(directed_index: int) -> float:
    """Default per-edge sinusoid phase, spread by the golden-ratio sequence."""
    return 2.0 * math.pi * ((directed_index * 0.6180339887498949) % 1.0)


class History:
    """Time-stamped samples of one signal with linear interpolation.

    Queries before the first record return the first recorded value.
    Samples older than ``retention`` seconds may be dropped; a query that
    falls into a dropped span raises UncoveredLookback.  Queries up to
    ``forward_slack`` seconds past the newest sample extrapolate linearly,
    which explicit steppers need for sub-stage times.
    """

    def __init__(self, retention: float | None = None, forward_slack: float = 0.0):
        if retention is not None and not retention > 0.0:
            raise ValueError("retention must be positive when given")
        self.retention = retention
        self.forward_slack = forward_slack
        self._ts: list[float] = []
        self._xs: list[np.ndarray] = []
        self._first: tuple[float, np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self._ts)

    def record(self, t: float, x) -> None:
        """Append a sample; timestamps must be strictly increasing."""
        if self._ts and t <= self._ts[-1]:
            raise ValueError(
                f"non-monotone timestamp {t} (last recorded {self._ts[-1]})"
            )
        x = np.array(x, dtype=float, copy=True)
        if self._first is None:
            self._first = (t, x)
        self._ts.append(float(t))
        self._xs.append(x)
        if self.retention is not None:
            cutoff = self._ts[-1] - self.retention
            # keep one sample at or before the cutoff as the left bracket
            k = bisect.bisect_left(self._ts, cutoff)
            if k > 1:
                del self._ts[: k - 1]
                del self._xs[: k - 1]

    def query(self, s: float) -> np.ndarray:
        """Signal value at time s by linear interpolation of the samples."""
        if self._first is None:
            raise UncoveredLookback("history holds no samples")
        t0, x0 = self._first
        if s <= t0:
            return x0.copy()
        ts, xs = self._ts, self._xs
        if s < ts[0]:
            raise UncoveredLookback(
                f"query at {s} precedes the retained window starting at {ts[0]}"
            )
        last = ts[-1]
        if s > last:
            if s - last > self.forward_slack * (1.0 + 1e-9):
                raise UncoveredLookback(
                    f"query at {s} is {s - last:.3g}s past the newest sample "
                    f"(forward slack {self.forward_slack:.3g}s)"
                )
            if len(ts) == 1:
                return xs[-1].copy()
            ta, tb = ts[-2], ts[-1]
            w = (s - ta) / (tb - ta)
            return xs[-2] * (1.0 - w) + xs[-1] * w
        k = bisect.bisect_right(ts, s)
        if k == 0:
            return xs[0].copy()
        if k == len(ts):
            return xs[-1].copy()
        ta, tb = ts[k - 1], ts[k]
        w = (s - ta) / (tb - ta)
        return xs[k - 1] * (1.0 - w) + xs[k] * w


def query_delayed(history: History, t: float, profile: DelayProfile) -> np.ndarray:
    """Signal value at ``t - d(t)``: what a receiver sees at time t."""
    return history.query(t - profile.delay(t))


@dataclass
class DelayChannel:
    """One directed communication link: the sender's history plus a profile."""

    profile: DelayProfile
    history: History

    def record(self, t: float, x) -> None:
        self.history.record(t, x)

    def receive(self, t: float) -> np.ndarray:
        return query_delayed(self.history, t, self.profile)
