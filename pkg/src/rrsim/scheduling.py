"""Round-robin index maps and switching-time schedules.

Both schedule types share one numeric representation: a segment length ``T``
(``inf`` for a constant schedule) and an array of per-segment dwell times.
The jitted helpers below operate on that representation so the integrator's
compiled loop and the Python API evaluate the exact same arithmetic; the
Python API calls their plain-Python twins, which skips numba's runtime start-up.

The active channel at relative time ``s = t - t0`` is::

    1 + floor((s - m*tau*floor(s/(m*tau))) / tau)

which equals ``1 + (floor(s/tau) mod m)``; the second form is what is
evaluated, after snapping ``s`` forward by a tolerance so that a time landing
a hair before a switch instant adopts the post-switch index.
"""

from __future__ import annotations

import math
import types
from dataclasses import dataclass
from typing import Union

import numpy as np
from numba import njit

from rrsim.errors import ConfigurationError, DomainError

SNAP_REL = 1e-12
# a few ulps of |s| so that snapping survives large s / small tau
_ULP_GUARD = 8 * 2.220446049250313e-16


@njit(cache=True)
def _snap(s, tau, m):
    return SNAP_REL * m * tau + _ULP_GUARD * abs(s)


@njit(cache=True)
def _segment(s, T, n):
    if n == 1 or not math.isfinite(T):
        return 0
    seg = int(math.floor((s + SNAP_REL * T + _ULP_GUARD * abs(s)) / T))
    if seg > n - 1:
        seg = n - 1
    return seg


@njit(cache=True)
def _tau_at(s, T, taus):
    return taus[_segment(s, T, taus.shape[0])]


@njit(cache=True)
def _index(s, T, taus, m):
    tau = taus[_segment(s, T, taus.shape[0])]
    j = int(math.floor((s + _snap(s, tau, m)) / tau))
    return 1 + j % m


@njit(cache=True)
def _next(s, T, taus, m):
    n = taus.shape[0]
    seg = _segment(s, T, n)
    tau = taus[seg]
    j = int(math.floor((s + _snap(s, tau, m)) / tau))
    nxt = (j + 1) * tau
    if seg < n - 1:
        edge = (seg + 1) * T
        if edge < nxt:
            nxt = edge
    return nxt


def rebind(fn, **names):
    """Copy of the Python function ``fn`` with some of its globals replaced."""
    fn = getattr(fn, "py_func", fn)
    return types.FunctionType(fn.__code__, {**fn.__globals__, **names}, fn.__name__, fn.__defaults__)


_snap_py = _snap.py_func
_segment_py = _segment.py_func
_tau_at_py = rebind(_tau_at, _segment=_segment_py)
_index_py = rebind(_index, _segment=_segment_py, _snap=_snap_py)
_next_py = rebind(_next, _segment=_segment_py, _snap=_snap_py)


@dataclass(frozen=True)
class ConstantSchedule:
    """Round-robin over ``m`` channels with a fixed dwell time ``tau`` (s)."""

    tau: float
    m: int
    t0: float = 0.0

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ConfigurationError(f"tau must be positive and finite, got {self.tau}")
        if self.m < 1:
            raise ConfigurationError(f"m must be >= 1, got {self.m}")

    @property
    def segment_length(self) -> float:
        return math.inf

    @property
    def taus(self) -> tuple[float, ...]:
        return (float(self.tau),)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (0.0,)

    def tau_at(self, t: float) -> float:
        _check_time(self, t)
        return float(self.tau)

    def kernel_args(self) -> tuple[float, np.ndarray]:
        return math.inf, np.array([self.tau], dtype=float)

    def to_dict(self) -> dict:
        return {"type": "constant", "tau": self.tau}


@dataclass(frozen=True)
class PiecewiseSchedule:
    """Piecewise-constant, non-increasing dwell times on segments of equal length.

    Segment ``i`` covers relative times ``[i*T, (i+1)*T)``; beyond the last
    breakpoint the final dwell time persists.
    """

    segment_length: float
    taus: tuple[float, ...]
    m: int
    t0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "taus", tuple(float(v) for v in self.taus))
        if not (self.segment_length > 0 and math.isfinite(self.segment_length)):
            raise ConfigurationError("segment_length must be positive and finite")
        if self.m < 1:
            raise ConfigurationError(f"m must be >= 1, got {self.m}")
        if not self.taus:
            raise ConfigurationError("at least one dwell time is required")
        if any(not (v > 0 and math.isfinite(v)) for v in self.taus):
            raise ConfigurationError("dwell times must be positive and finite")
        if any(b > a for a, b in zip(self.taus, self.taus[1:])):
            raise ConfigurationError(f"dwell times must be non-increasing: {self.taus}")

    @classmethod
    def from_breakpoints(cls, breakpoints, values, m: int, t0: float = 0.0) -> "PiecewiseSchedule":
        bps = [float(b) for b in breakpoints]
        if len(bps) != len(values):
            raise ConfigurationError("one value per breakpoint is required")
        if not bps or bps[0] != 0.0:
            raise ConfigurationError("breakpoints must start at 0")
        if len(bps) == 1:
            raise ConfigurationError("a single breakpoint is a ConstantSchedule")
        T = bps[1] - bps[0]
        for i, b in enumerate(bps):
            if not math.isclose(b, i * T, rel_tol=1e-12, abs_tol=1e-12 * T):
                raise ConfigurationError(f"breakpoints must be equally spaced; got {bps}")
        return cls(T, tuple(values), m, t0)

    @classmethod
    def geometric(cls, tau0: float, factor: float, segment_length: float,
                  segments: int, m: int, t0: float = 0.0) -> "PiecewiseSchedule":
        """``tau0 * factor**i`` on segment ``i`` for ``i < segments``."""
        return cls(segment_length, tuple(tau0 * factor**i for i in range(segments)), m, t0)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(i * self.segment_length for i in range(len(self.taus)))

    def tau_at(self, t: float) -> float:
        _check_time(self, t)
        T, taus = self.kernel_args()
        return float(_tau_at_py(float(t - self.t0), T, taus))

    def kernel_args(self) -> tuple[float, np.ndarray]:
        return float(self.segment_length), np.array(self.taus, dtype=float)

    def to_dict(self) -> dict:
        return {"type": "piecewise", "segment_length": self.segment_length, "taus": list(self.taus)}


Schedule = Union[ConstantSchedule, PiecewiseSchedule]


def _check_time(schedule: Schedule, t: float) -> None:
    if t < schedule.t0:
        raise DomainError(f"t={t} precedes schedule start t0={schedule.t0}")


def active_index(schedule: Schedule, t: float) -> int:
    """Channel (1..m) active at time ``t`` under a round-robin schedule."""
    _check_time(schedule, t)
    T, taus = schedule.kernel_args()
    return int(_index_py(float(t - schedule.t0), T, taus, schedule.m))


def active_index_tv(schedule: PiecewiseSchedule, t: float) -> int:
    """Time-varying variant; the dwell time is looked up from the segment containing ``t``.

    At a segment boundary the new dwell time applies (right limit).
    """
    return active_index(schedule, t)


def next_switch_time(schedule: Schedule, t: float) -> float:
    """Smallest time after ``t`` where the active channel or the segment changes."""
    _check_time(schedule, t)
    T, taus = schedule.kernel_args()
    return schedule.t0 + float(_next_py(float(t - schedule.t0), T, taus, schedule.m))


def _as_segments(s: Schedule) -> tuple[tuple[float, ...], tuple[float, ...]]:
    return s.breakpoints, s.taus


def dominates(tau1: Schedule, tau2: Schedule) -> bool:
    """True iff ``tau1(t) <= tau2(t)`` for every t (``tau1`` switches at least as fast)."""
    if tau1.m != tau2.m or tau1.t0 != tau2.t0:
        raise ConfigurationError("domination needs schedules with the same m and t0")
    points = sorted(set(tau1.breakpoints) | set(tau2.breakpoints))
    for p in points:
        t = tau1.t0 + p
        if tau1.tau_at(t) > tau2.tau_at(t):
            return False
    return True


def schedule_from_dict(data: dict, m: int, t0: float = 0.0) -> Schedule:
    """Parse ``{"type": "constant", "tau": ...}`` or ``{"type": "piecewise", ...}``."""
    if not isinstance(data, dict) or "type" not in data:
        raise ConfigurationError(f"schedule must be an object with a 'type': {data!r}")
    kind = data["type"]
    if kind == "constant":
        _reject_unknown(data, {"type", "tau"})
        return ConstantSchedule(float(data["tau"]), m, t0)
    if kind == "piecewise":
        _reject_unknown(data, {"type", "segment_length", "taus"})
        return PiecewiseSchedule(float(data["segment_length"]), tuple(data["taus"]), m, t0)
    raise ConfigurationError(f"unknown schedule type {kind!r}")


def _reject_unknown(data: dict, allowed: set[str]) -> None:
    extra = set(data) - allowed
    if extra:
        raise ConfigurationError(f"unknown schedule fields: {sorted(extra)}")
    missing = allowed - set(data)
    if missing:
        raise ConfigurationError(f"missing schedule fields: {sorted(missing)}")
