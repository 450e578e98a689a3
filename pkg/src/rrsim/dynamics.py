"""Control-affine systems and their nominal / round-robin closed-loop fields."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from rrsim.errors import BlowupError, ConfigurationError
from rrsim.scheduling import Schedule, active_index

P_IV_TOL = 1e-12
# difference-quotient increments for the Lipschitz probe
COARSE_STEP = 1e-2
FINE_STEP = 1e-8


class Kernel(NamedTuple):
    """Compiled closed-loop field used by the integrator's fast path.

    ``rhs(t, x, k, c, params, out)`` writes ``f(x) + c*g_k(x)*u_k(x)`` into
    ``out`` (``k = 0`` means all channels with unit gain); ``post(x, params)``
    is an in-place projection applied after every accepted step.
    """

    rhs: Callable
    post: Callable
    params: np.ndarray


@dataclass(frozen=True, eq=False)
class ControlAffineSystem:
    """``x' = f(x) + sum_k g_k(x) u_k(x)`` with ``d`` states and ``m`` channels.

    ``channels(x)`` returns the ``d x m`` matrix whose columns are ``g_k(x)``.
    ``jacobian(x)``, when given, is the analytic Jacobian of the nominal
    closed-loop field. ``project`` is an optional post-step projection
    (e.g. quaternion renormalization) used by the integrator.
    """

    d: int
    m: int
    drift: Callable[[np.ndarray], np.ndarray]
    channels: Callable[[np.ndarray], np.ndarray]
    feedback: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kernel: Optional[Kernel] = None
    name: str = ""

    def __post_init__(self):
        if self.d < 1 or self.m < 0:
            raise ConfigurationError(f"invalid dimensions d={self.d}, m={self.m}")

    @classmethod
    def autonomous(cls, field: Callable[[np.ndarray], np.ndarray], d: int,
                   name: str = "") -> "ControlAffineSystem":
        """Wrap a plain vector field as a system with no control channels."""
        return cls(
            d=d,
            m=0,
            drift=field,
            channels=lambda x: np.zeros((d, 0)),
            feedback=lambda x: np.zeros(0),
            name=name,
        )

    def channel(self, x: np.ndarray, k: int) -> np.ndarray:
        """The ``k``-th (1-based) control vector field at ``x``."""
        return np.asarray(self.channels(x), dtype=float)[:, k - 1]


def _state(sys: ControlAffineSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.d,):
        raise ConfigurationError(f"state has shape {x.shape}, expected ({sys.d},)")
    return x


def _finite(v: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(v)):
        raise BlowupError(f"{what} produced a non-finite value")
    return v


def _parts(sys: ControlAffineSystem, x: np.ndarray):
    f = np.asarray(sys.drift(x), dtype=float)
    G = np.asarray(sys.channels(x), dtype=float).reshape(sys.d, sys.m)
    u = np.asarray(sys.feedback(x), dtype=float).reshape(sys.m)
    return f, G, u


def eval_nominal_rhs(sys: ControlAffineSystem, x) -> np.ndarray:
    """``f(x) + sum_k g_k(x) u_k(x)``."""
    x = _state(sys, x)
    f, G, u = _parts(sys, x)
    return _finite(f + G @ u, "nominal closed loop")


def eval_switched_rhs(sys: ControlAffineSystem, x, t: float, schedule: Schedule,
                      scaled: bool = True) -> np.ndarray:
    """``f(x) + c g_k(x) u_k(x)`` with ``k`` the active channel and ``c = m`` (or 1)."""
    if schedule.m != sys.m:
        raise ConfigurationError(f"schedule has m={schedule.m}, system has m={sys.m}")
    k = active_index(schedule, t)
    x = _state(sys, x)
    f, G, u = _parts(sys, x)
    c = float(sys.m) if scaled else 1.0
    return _finite(f + c * G[:, k - 1] * u[k - 1], "switched closed loop")


def fd_step(x: np.ndarray) -> np.ndarray:
    return 1e-6 * (1.0 + np.abs(x))


def closed_loop_jacobian(sys: ControlAffineSystem, x=None) -> np.ndarray:
    """Jacobian of the nominal closed loop; central differences when no analytic form."""
    x = np.zeros(sys.d) if x is None else _state(sys, x)
    if sys.jacobian is not None:
        return np.asarray(sys.jacobian(x), dtype=float)
    h = fd_step(x)
    J = np.empty((sys.d, sys.d))
    for j in range(sys.d):
        e = np.zeros(sys.d)
        e[j] = h[j]
        J[:, j] = (eval_nominal_rhs(sys, x + e) - eval_nominal_rhs(sys, x - e)) / (2 * h[j])
    return J


def validate_premise(sys: ControlAffineSystem, radius: float = 1.0, samples: int = 32,
                     seed: int = 0) -> list[str]:
    """Report which standing assumptions fail numerically.

    ``"P-iv"``: ``f(0) != 0`` or some ``u_k(0) != 0`` beyond 1e-12.
    ``"P-i"``: a field is non-finite on the sampled ball, or its difference
    quotients grow more than 100-fold as the increment shrinks from 1e-2 to
    1e-8 (not locally Lipschitz).  The origin is always among the samples.
    Hyperbolicity is not gated here; see ``analysis.hyperbolicity_margin``.
    """
    violated = []
    zero = np.zeros(sys.d)
    try:
        f0, _, u0 = _parts(sys, zero)
        if np.max(np.abs(f0), initial=0.0) > P_IV_TOL or np.max(np.abs(u0), initial=0.0) > P_IV_TOL:
            violated.append("P-iv")
    except (FloatingPointError, ValueError):
        violated.append("P-iv")

    rng = np.random.default_rng(seed)

    def fields(x):
        f, G, u = _parts(sys, x)
        return [f] + [G[:, k] * u[k] for k in range(sys.m)]

    for i in range(samples):
        # the equilibrium itself is always probed
        v = rng.normal(size=sys.d)
        x = np.zeros(sys.d) if i == 0 else radius * rng.uniform() ** (1.0 / sys.d) * v / np.linalg.norm(v)
        dirn = rng.normal(size=sys.d)
        dirn /= np.linalg.norm(dirn)
        with np.errstate(all="ignore"):
            base = fields(x)
            coarse = fields(x + COARSE_STEP * dirn)
            fine = fields(x + FINE_STEP * dirn)
        for b, c, fn in zip(base, coarse, fine):
            if not (np.all(np.isfinite(b)) and np.all(np.isfinite(c)) and np.all(np.isfinite(fn))):
                violated.append("P-i")
                return violated
            q_coarse = np.linalg.norm(c - b) / COARSE_STEP
            q_fine = np.linalg.norm(fn - b) / FINE_STEP
            if q_fine > 100.0 * q_coarse + 1.0:
                violated.append("P-i")
                return violated
    return violated
