"""Empirical stability analysis of simulated trajectories.

Trajectory gaps, contraction constants of the linearization, stability
verdicts, exponential-decay fits and a bisection probe for the largest
switching time that still converges.  Sup-norms are taken over the recorded
grid, not continuous time.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm

from rrsim.bounds import contraction_rate
from rrsim.dynamics import ControlAffineSystem, closed_loop_jacobian
from rrsim.errors import AnalysisError, DomainError
from rrsim.integrator import IntegratorConfig, Trajectory, integrate
from rrsim.scheduling import ConstantSchedule

GRID_TOL = 1e-9
C_GRID = 2000


def thread_count() -> int:
    """Worker cap for sweeps: ``RR_SIM_THREADS`` or the machine's CPU count."""
    env = os.environ.get("RR_SIM_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise AnalysisError(f"RR_SIM_THREADS must be an integer, got {env!r}") from None
        return max(1, n)
    return os.cpu_count() or 1


def parallel_map(fn, items: Sequence, threads: Optional[int] = None) -> list:
    """``[fn(x) for x in items]`` on a thread pool; results keep input order."""
    n = min(threads or thread_count(), max(1, len(items)))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _window_mask(traj: Trajectory, window) -> np.ndarray:
    a, b = window
    tol = GRID_TOL * max(1.0, abs(b))
    return (traj.times >= a - tol) & (traj.times <= b + tol)


def sup_norm_gap(nominal: Trajectory, switched: Trajectory, window) -> float:
    """Largest Euclidean state gap over the shared grid points in ``window``."""
    ma, mb = _window_mask(nominal, window), _window_mask(switched, window)
    ta, tb = nominal.times[ma], switched.times[mb]
    if len(ta) == 0 or len(ta) != len(tb):
        raise AnalysisError(f"trajectories do not share a grid on {tuple(window)}")
    if np.max(np.abs(ta - tb)) > GRID_TOL * max(1.0, float(np.max(np.abs(ta)))):
        raise AnalysisError("trajectory time grids differ")
    if nominal.d != switched.d:
        raise AnalysisError("trajectories have different state dimensions")
    a, b = window
    covered = ta[0] <= a + GRID_TOL * max(1.0, abs(a)) and ta[-1] >= b - GRID_TOL * max(1.0, abs(b))
    if not covered:
        raise AnalysisError(f"trajectories do not cover {tuple(window)}")
    return float(np.max(np.linalg.norm(nominal.states[ma] - switched.states[mb], axis=1)))


@dataclass
class DivergenceReport:
    """Sup-norm gap between nominal and switched runs, one entry per ``tau``."""

    taus: list
    gaps: list
    window: tuple
    step: float
    scaled: bool = True

    def non_increasing(self) -> bool:
        return all(b <= a for a, b in zip(self.gaps, self.gaps[1:]))

    def to_dict(self) -> dict:
        return {"taus": list(self.taus), "gaps": list(self.gaps), "window": list(self.window),
                "step": self.step, "scaled": self.scaled}


def tau_sweep(system: ControlAffineSystem, x0, taus: Sequence[float], config: IntegratorConfig,
              window, *, t0: float = 0.0, scaled: bool = True,
              threads: Optional[int] = None) -> DivergenceReport:
    """Gap between the nominal loop and the switched loop for each ``tau``."""
    nominal = integrate(system, x0, config, t0=t0)

    def gap(tau):
        traj = integrate(system, x0, config, ConstantSchedule(tau, system.m, t0), t0=t0, scaled=scaled)
        if traj.blowup:
            return math.inf
        return sup_norm_gap(nominal, traj, window)

    gaps = parallel_map(gap, list(taus), threads)
    return DivergenceReport([float(t) for t in taus], gaps, tuple(window), config.step, scaled)


@dataclass(frozen=True)
class ContractionConstants:
    """``||exp(A t)|| <= C exp(-lambda_prime t)`` for the linearization ``A`` at 0."""

    lambda_g: float
    lambda_prime: float
    kappa: float
    C: float
    lam: float

    def to_dict(self) -> dict:
        return {"lambda_g": self.lambda_g, "lambda_prime": self.lambda_prime,
                "kappa": self.kappa, "C": self.C, "lambda": self.lam}


def overshoot_constant(A: np.ndarray, lambda_prime: float, grid: int = C_GRID) -> float:
    """``max_t ||exp(A t)||_2 exp(lambda_prime t)`` over ``grid`` points of ``[0, 50/lambda_prime]``."""
    ts = np.linspace(0.0, 50.0 / lambda_prime, grid)
    return max(float(np.linalg.norm(expm(A * t), 2) * math.exp(lambda_prime * t)) for t in ts)


def contraction_constants(system: ControlAffineSystem, kappa: float, lambda_prime_fraction: float,
                          grid: int = C_GRID) -> ContractionConstants:
    if not 0.0 < lambda_prime_fraction < 1.0 + 1e-15:
        raise DomainError("lambda_prime_fraction must lie in (0, 1]")
    A = closed_loop_jacobian(system)
    lambda_g = float(np.min(-np.linalg.eigvals(A).real))
    if lambda_g <= 0:
        raise DomainError(f"closed-loop Jacobian at 0 is not Hurwitz (margin {lambda_g})")
    lambda_prime = lambda_prime_fraction * lambda_g
    # the t = 0 sample makes C >= 1 up to rounding
    C = max(1.0, overshoot_constant(A, lambda_prime, grid))
    return ContractionConstants(lambda_g, lambda_prime, kappa, C, contraction_rate(lambda_prime, kappa, C))


def hyperbolicity_margin(system: ControlAffineSystem) -> float:
    """``min |Re eig|`` of the closed-loop Jacobian at 0 (reported, not gated)."""
    return float(np.min(np.abs(np.linalg.eigvals(closed_loop_jacobian(system)).real)))


STAYS_IN_BALL = "StaysInBall"
CONVERGES = "ConvergesTo0"
DIVERGES = "Diverges"
BLOWUP = "Blowup"


@dataclass(frozen=True)
class StabilityVerdict:
    """Classification of one run.

    ``time`` is the first exit time for ``Diverges``, the blowup time for
    ``Blowup`` and, for ``ConvergesTo0``, the time after which every sample
    stays within ``eta``.
    """

    kind: str
    epsilon: float
    eta: float
    time: Optional[float] = None
    sup_norm: float = math.nan
    components: Optional[tuple] = None

    @property
    def in_ball(self) -> bool:
        return self.kind in (STAYS_IN_BALL, CONVERGES)

    @property
    def converged(self) -> bool:
        return self.kind == CONVERGES

    def to_dict(self) -> dict:
        d = asdict(self)
        d["thresholds"] = {"epsilon": d.pop("epsilon"), "eta": d.pop("eta")}
        d["components"] = list(self.components) if self.components is not None else None
        return d


def stability_verdict(traj: Trajectory, epsilon: float, eta: float, settle_fraction: float = 0.5,
                      components: Optional[Sequence[int]] = None) -> StabilityVerdict:
    """Ball containment and convergence on the recorded samples.

    ``components`` restricts the norm to a subset of state coordinates.
    Convergence requires every sample from ``settle_fraction`` of the horizon
    onward to lie within ``eta``.
    """
    comps = tuple(components) if components is not None else None
    norms = traj.norms(list(comps) if comps is not None else None)
    sup = float(np.max(norms)) if len(norms) else math.nan
    if traj.blowup:
        return StabilityVerdict(BLOWUP, epsilon, eta, traj.blowup_time, sup, comps)
    outside = np.nonzero(norms > epsilon)[0]
    if len(outside):
        return StabilityVerdict(DIVERGES, epsilon, eta, float(traj.times[outside[0]]), sup, comps)
    t0, t1 = traj.times[0], traj.times[-1]
    settle = t0 + settle_fraction * (t1 - t0)
    tail = traj.times >= settle - GRID_TOL * max(1.0, abs(settle))
    if not np.all(norms[tail] <= eta):
        return StabilityVerdict(STAYS_IN_BALL, epsilon, eta, None, sup, comps)
    above = np.nonzero(norms > eta)[0]
    since = t0 if len(above) == 0 else traj.times[above[-1] + 1]
    return StabilityVerdict(CONVERGES, epsilon, eta, float(since), sup, comps)


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r2: float
    samples: int

    def __iter__(self):
        return iter((self.rate, self.r2))


def decay_fit(traj: Trajectory, window=None, components: Optional[Sequence[int]] = None) -> DecayFit:
    """Least-squares fit of ``log||x(t)||`` against ``t`` on ``window``.

    Samples from the first zero norm onward are dropped.  A perfectly flat
    log-norm counts as a perfect fit (``r2 = 1``).
    """
    mask = _window_mask(traj, window) if window is not None else np.ones(len(traj.times), bool)
    t = traj.times[mask]
    n = traj.norms(list(components) if components is not None else None)[mask]
    zeros = np.nonzero(n <= 0.0)[0]
    if len(zeros):
        t, n = t[: zeros[0]], n[: zeros[0]]
    if len(t) < 2:
        raise AnalysisError("fewer than two positive-norm samples in the window")
    y = np.log(n)
    X = np.column_stack([t, np.ones_like(t)])
    (slope, intercept), *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return DecayFit(float(slope), r2, len(t))


@dataclass
class ProbeResult:
    """Outcome of :func:`max_switching_time_probe`.

    ``tau`` is the largest tested switching time that converged (``None``
    on failure); ``tested`` lists ``(tau, converged)`` in test order.
    """

    tau: Optional[float]
    tested: list = field(default_factory=list)
    non_monotone: bool = False
    message: str = ""

    @property
    def success(self) -> bool:
        return self.tau is not None

    def to_dict(self) -> dict:
        return {"tau": self.tau, "tested": [list(p) for p in self.tested],
                "non_monotone": self.non_monotone, "message": self.message}


def max_switching_time_probe(system: ControlAffineSystem, x0, tau_lo: float, tau_hi: float,
                             horizon: float, eta: float, *, step: float, t0: float = 0.0,
                             epsilon: float = math.inf, settle_fraction: float = 0.5,
                             components: Optional[Sequence[int]] = None, rel_tol: float = 1e-2,
                             steps_per_dwell: Optional[int] = None,
                             check_nominal: bool = True) -> ProbeResult:
    """Largest constant switching time in ``[tau_lo, tau_hi]`` whose run converges.

    Log-scale bisection between a converging ``tau_lo`` and a failing
    ``tau_hi``.  Success is not assumed monotone in ``tau``: every tested
    point is kept and ``non_monotone`` flags a failure below a success.
    """
    if not 0 < tau_lo <= tau_hi:
        raise DomainError(f"need 0 < tau_lo <= tau_hi, got {tau_lo}, {tau_hi}")
    config = IntegratorConfig(step=step, horizon=horizon, steps_per_dwell=steps_per_dwell)

    def converges(schedule=None) -> bool:
        traj = integrate(system, x0, config, schedule, t0=t0)
        return stability_verdict(traj, epsilon, eta, settle_fraction, components).converged

    if check_nominal and not converges():
        raise AnalysisError("the nominal closed loop does not converge from x0")

    tested = []

    def test(tau):
        ok = converges(ConstantSchedule(tau, system.m, t0))
        tested.append((tau, ok))
        return ok

    if test(tau_hi):
        return ProbeResult(tau_hi, tested, message="tau_hi converges")
    if tau_lo == tau_hi or not test(tau_lo):
        return ProbeResult(None, tested, message=f"no converging tau in [{tau_lo}, {tau_hi}]")
    lo, hi = tau_lo, tau_hi
    while hi / lo > 1.0 + rel_tol:
        mid = math.sqrt(lo * hi)
        if test(mid):
            lo = mid
        else:
            hi = mid
    ordered = sorted(tested)
    fails = [t for t, ok in ordered if not ok]
    successes = [t for t, ok in ordered if ok]
    non_monotone = bool(fails and successes and min(fails) < max(successes))
    return ProbeResult(max(successes), tested, non_monotone, "bisection converged")
