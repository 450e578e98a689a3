"""Fixed-step RK4 with steps clamped to switch instants.

The base grid is ``t0 + k*h`` (index arithmetic, no accumulated drift).  Each
base interval is cut at every switch instant and schedule-segment boundary
falling inside it, so the active channel is constant on every RK4 step.
Samples are recorded on the base grid only.

The marching loop ``_march`` is written once and run either as plain Python
(arbitrary callables) or compiled with numba when the system ships a
:class:`~rrsim.dynamics.Kernel`.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from numba import njit

from rrsim.dynamics import ControlAffineSystem
from rrsim.errors import ConfigurationError
from rrsim.scheduling import (Schedule, _index, _index_py, _next, _next_py, _snap, _snap_py, _tau_at,
                              _tau_at_py, rebind)

BLOWUP_THRESHOLD = 1e12
EXACT = "exact"


@dataclass(frozen=True)
class IntegratorConfig:
    """RK4 settings.

    step: base step ``h`` (s).  horizon: final time relative to ``t0`` (s).
    record_stride: keep every ``record_stride``-th base-grid sample.
    steps_per_dwell: if set, every step inside a dwell interval is further
    limited to ``tau(t) / steps_per_dwell``.
    """

    step: float
    horizon: float
    record_stride: int = 1
    steps_per_dwell: Optional[int] = None

    def __post_init__(self):
        if not (0 < self.step <= self.horizon) or not math.isfinite(self.horizon):
            raise ConfigurationError(f"need 0 < step <= horizon, got {self.step}, {self.horizon}")
        if self.record_stride < 1:
            raise ConfigurationError("record_stride must be >= 1")
        if self.steps_per_dwell is not None and self.steps_per_dwell < 1:
            raise ConfigurationError("steps_per_dwell must be >= 1")

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.horizon / self.step - 1e-9))


@dataclass
class Trajectory:
    """Recorded samples of a closed-loop run.

    ``active`` holds the channel governing the interval starting at each
    sample (0 for nominal runs).  A run stopped by blowup keeps the samples
    recorded so far and sets ``blowup_time`` to the last time with a finite,
    in-range state.
    """

    times: np.ndarray
    states: np.ndarray
    active: np.ndarray
    blowup: bool = False
    blowup_time: Optional[float] = None
    step: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.states.shape[1]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def norms(self, components=None) -> np.ndarray:
        s = self.states if components is None else self.states[:, components]
        return np.linalg.norm(s, axis=1)

    def to_csv(self, path=None) -> str:
        """Header ``t,x1..xd,active``; 17 significant digits so values round-trip."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(self.d)] + ["active"])
        for t, x, a in zip(self.times, self.states, self.active):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in x] + [str(int(a))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        return cls.parse_csv(Path(path).read_text())

    @classmethod
    def parse_csv(cls, text: str) -> "Trajectory":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        if header[0] != "t" or header[-1] != "active":
            raise ConfigurationError(f"unexpected trajectory header {header}")
        data = np.array([[float(v) for v in r[:-1]] for r in body]).reshape(len(body), len(header) - 1)
        active = np.array([int(r[-1]) for r in body], dtype=np.int64)
        return cls(times=data[:, 0].copy(), states=data[:, 1:].copy(), active=active)


def _march(rhs, post, params, x0, t0, h, n_base, t_end, stride, has_sched,
           seg_T, taus, m, c, per_dwell):
    d = x0.shape[0]
    x = x0.copy()
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    tmp = np.empty(d)
    n_rec = n_base // stride + 2
    times = np.empty(n_rec)
    states = np.empty((n_rec, d))
    active = np.zeros(n_rec, dtype=np.int64)

    times[0] = t0
    states[0, :] = x
    if has_sched:
        active[0] = _index(0.0, seg_T, taus, m)
    rec = 1
    blown = False
    t_blow = math.nan

    for kb in range(n_base):
        ta = t0 + kb * h
        tb = t0 + (kb + 1) * h
        if tb > t_end or kb == n_base - 1:
            tb = t_end
        t = ta
        while t < tb and not blown:
            k = 0
            hh = h
            b = tb
            if has_sched:
                s = t - t0
                k = _index(s, seg_T, taus, m)
                tau = _tau_at(s, seg_T, taus)
                nxt = t0 + _next(s, seg_T, taus, m)
                if nxt < tb - _snap(tb - t0, tau, m):
                    b = nxt
                if per_dwell > 0 and tau / per_dwell < hh:
                    hh = tau / per_dwell
            if b <= t:
                b = tb
            nsub = int(math.ceil((b - t) / hh - 1e-9))
            if nsub < 1:
                nsub = 1
            dt = (b - t) / nsub
            for j in range(nsub):
                ts = t + j * dt
                rhs(ts, x, k, c, params, k1)
                for i in range(d):
                    tmp[i] = x[i] + 0.5 * dt * k1[i]
                rhs(ts + 0.5 * dt, tmp, k, c, params, k2)
                for i in range(d):
                    tmp[i] = x[i] + 0.5 * dt * k2[i]
                rhs(ts + 0.5 * dt, tmp, k, c, params, k3)
                for i in range(d):
                    tmp[i] = x[i] + dt * k3[i]
                rhs(ts + dt, tmp, k, c, params, k4)
                for i in range(d):
                    tmp[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                ok = True
                for i in range(d):
                    if not (abs(tmp[i]) <= BLOWUP_THRESHOLD):
                        ok = False
                if not ok:
                    blown = True
                    t_blow = ts
                    break
                for i in range(d):
                    x[i] = tmp[i]
                post(x, params)
            t = b
        if blown:
            break
        if (kb + 1) % stride == 0 or kb == n_base - 1:
            times[rec] = tb
            states[rec, :] = x
            if has_sched:
                active[rec] = _index(tb - t0, seg_T, taus, m)
            rec += 1

    return times[:rec], states[:rec], active[:rec], blown, t_blow


# Functions passed as arguments are typed by identity, so this cannot be
# cached on disk; compile cost (~seconds) is paid once per process.
_march_jit = njit(nogil=True)(_march)
# the same loop on the plain-Python schedule helpers, for short runs
_march_py = rebind(_march, _index=_index_py, _next=_next_py, _snap=_snap_py, _tau_at=_tau_at_py)

KERNEL_MIN_STEPS = 100_000


def _python_field(system: ControlAffineSystem, stage_hook: Optional[Callable] = None):
    def rhs(t, x, k, c, params, out):
        if stage_hook is not None:
            stage_hook(t, k)
        f = np.asarray(system.drift(x), dtype=float)
        if system.m == 0:
            out[:] = f
            return
        G = np.asarray(system.channels(x), dtype=float).reshape(system.d, system.m)
        u = np.asarray(system.feedback(x), dtype=float).reshape(system.m)
        if k == 0:
            out[:] = f + G @ u
        else:
            out[:] = f + c * G[:, k - 1] * u[k - 1]

    if system.project is None:
        post = _py_no_post
    else:
        def post(x, params):
            x[:] = system.project(x)
    return rhs, post


def _py_no_post(x, params):
    pass


def integrate(system: ControlAffineSystem, x0, config: IntegratorConfig,
              schedule: Optional[Schedule] = None, *, t0: float = 0.0, scaled: bool = True,
              use_kernel: Optional[bool] = None, stage_hook: Optional[Callable] = None) -> Trajectory:
    """Integrate the nominal (no schedule) or round-robin closed loop from ``x0``.

    With a schedule, channel ``k`` is driven by ``c*u_k`` during its dwell,
    ``c = m`` when ``scaled`` else 1.  ``stage_hook(t, k)`` is called at every
    RK4 stage evaluation (forces the Python path; used for instrumentation).
    ``use_kernel=None`` picks the compiled path only for runs long enough to
    amortize its compilation.
    """
    x0 = np.asarray(x0, dtype=float).copy()
    if x0.shape != (system.d,):
        raise ConfigurationError(f"x0 has shape {x0.shape}, expected ({system.d},)")
    if not np.all(np.isfinite(x0)):
        raise ConfigurationError("x0 must be finite")

    has_sched = schedule is not None
    if has_sched:
        if schedule.m != system.m:
            raise ConfigurationError(f"schedule has m={schedule.m}, system has m={system.m}")
        if schedule.t0 != t0:
            raise ConfigurationError(f"schedule t0={schedule.t0} differs from run t0={t0}")
        seg_T, taus = schedule.kernel_args()
        if config.steps_per_dwell is None and config.step > taus[0] * (1 + 1e-12):
            warnings.warn(
                f"step {config.step} exceeds the dwell time {taus[0]}; steps are clamped to switch instants",
                stacklevel=2,
            )
    else:
        seg_T, taus = math.inf, np.ones(1)
    m = max(system.m, 1)
    c = float(system.m) if scaled else 1.0
    per_dwell = config.steps_per_dwell or 0
    n_base = config.n_steps
    t_end = t0 + config.horizon

    if use_kernel is None:
        use_kernel = estimated_steps(config, schedule) >= KERNEL_MIN_STEPS
    if use_kernel and system.kernel is not None and stage_hook is None:
        kern = system.kernel
        out = _march_jit(kern.rhs, kern.post, kern.params, x0, float(t0), float(config.step),
                         n_base, float(t_end), config.record_stride, has_sched,
                         float(seg_T), taus, m, c, per_dwell)
    else:
        rhs, post = _python_field(system, stage_hook)
        out = _march_py(rhs, post, None, x0, float(t0), float(config.step), n_base, float(t_end),
                     config.record_stride, has_sched, float(seg_T), taus, m, c, per_dwell)
    times, states, active, blown, t_blow = out
    return Trajectory(
        times=np.asarray(times),
        states=np.asarray(states),
        active=np.asarray(active),
        blowup=bool(blown),
        blowup_time=float(t_blow) if blown else None,
        step=config.step,
        meta={"system": system.name, "scaled": scaled,
              "schedule": schedule.to_dict() if has_sched else None},
    )


def estimated_steps(config: IntegratorConfig, schedule: Optional[Schedule] = None) -> int:
    """Rough count of RK4 steps a run will take."""
    h = config.step
    if schedule is not None:
        tau_min = min(schedule.taus)
        h = min(h, tau_min / (config.steps_per_dwell or 1))
    return int(config.horizon / h) + config.n_steps


def convergence_order(system: ControlAffineSystem, x0, t0: float, t1: float,
                      step: Optional[float] = None):
    """Observed RK4 order from runs at ``h`` and ``h/2`` against a reference at ``h/8``.

    Returns ``log2(err(h)/err(h/2))``, or :data:`EXACT` when both errors vanish.
    """
    h = step if step is not None else (t1 - t0) / 10.0

    def final(hh):
        cfg = IntegratorConfig(step=hh, horizon=t1 - t0)
        return integrate(system, x0, cfg, t0=t0).final_state

    ref = final(h / 8)
    e1 = np.linalg.norm(final(h) - ref)
    e2 = np.linalg.norm(final(h / 2) - ref)
    if e1 == 0.0 and e2 == 0.0:
        return EXACT
    if e2 == 0.0:
        return math.inf
    return math.log2(e1 / e2)
