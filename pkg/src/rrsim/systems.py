"""The two case-study plants: a linearized cart-pendulum coupled to a mass-spring
oscillator, and a rigid spacecraft with quaternion attitude and a PD-type
attitude controller.

Spacecraft states are always expressed in shifted coordinates whose origin is
the target equilibrium.  With a reference spin ``omega_bar`` about the body
x axis, the attitude part is the error quaternion relative to a reference
frame spinning at ``omega_bar``; its kinematics are

    q_e' = 1/2 (q_e * (0, w) - (0, omega_bar e1) * q_e)

which reduces to the plain kinematics when ``omega_bar = 0`` and makes
``(q_e, w) = ((1,0,0,0), omega_bar e1)`` an actual equilibrium otherwise.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from rrsim.dynamics import ControlAffineSystem, Kernel
from rrsim.errors import ConfigurationError, IntegrityError
from rrsim.lqr import GainMatrix, synthesize_gain


# --------------------------------------------------------------------------
# coupled linear plant


@dataclass(frozen=True)
class CartPendulumMassSpringParams:
    """Physical and run parameters of the coupled linear plant (SI units)."""

    M: float = 3.0
    mp: float = 0.25
    L: float = 1.0
    g: float = 9.81
    sim_horizon: float = 50.0
    tau: float = 0.5
    step: float = 0.05
    x0: tuple = (0.0, math.pi / 10, 0.0, 0.0, 1.0, 1.05)
    # LQR weights Q = diag(lqr_q), R = lqr_r * I; chosen so that the m-scaled
    # loop converges at tau = 0.5 s while the unscaled loop diverges
    lqr_q: tuple = (100.0, 0.1, 200.0, 0.15, 0.5, 0.05)
    lqr_r: float = 0.15

    def __post_init__(self):
        for name in ("M", "mp", "L", "g"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if len(self.x0) != 6:
            raise ConfigurationError("x0 must have 6 entries")
        if len(self.lqr_q) != 6 or not (min(self.lqr_q) > 0 and self.lqr_r > 0):
            raise ConfigurationError("LQR weights must be positive, with 6 state weights")


def coupled_matrices(p: CartPendulumMassSpringParams) -> tuple[np.ndarray, np.ndarray]:
    A = np.zeros((6, 6))
    A[0, 1] = 1.0
    A[1, 2] = -p.mp * p.g / p.M
    A[2, 3] = 1.0
    A[3, 2] = (p.mp + p.M) * p.g / (p.L * p.M)
    A[4, 5] = 1.0
    A[5, 4] = -1.0
    B = np.array([
        [0.0, 0.0],
        [1.0 / p.M, 0.1],
        [0.0, 0.0],
        [-1.0 / (p.L * p.M), 0.1],
        [0.0, 0.0],
        [0.1, 1.0],
    ])
    return A, B


def coupled_gain(p: CartPendulumMassSpringParams) -> GainMatrix:
    A, B = coupled_matrices(p)
    return synthesize_gain(A, B, np.diag(p.lqr_q), p.lqr_r * np.eye(2))


@njit(cache=True)
def _linear_rhs(t, x, k, c, p, out):
    d = x.shape[0]
    m = int(p[1])
    a0 = 2
    b0 = a0 + d * d
    k0 = b0 + d * m
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += p[a0 + i * d + j] * x[j]
        out[i] = acc
    for ch in range(m):
        if k != 0 and ch != k - 1:
            continue
        u = 0.0
        for j in range(d):
            u -= p[k0 + ch * d + j] * x[j]
        gain = 1.0 if k == 0 else c
        for i in range(d):
            out[i] += gain * p[b0 + i * m + ch] * u


@njit(cache=True)
def _linear_post(x, p):
    pass


def linear_system(A, B, K, name: str = "linear") -> ControlAffineSystem:
    """``x' = A x + B u`` with ``u = -K x``."""
    A = np.array(A, dtype=float)
    B = np.array(B, dtype=float)
    K = np.array(K, dtype=float)
    d, m = B.shape
    if A.shape != (d, d) or K.shape != (m, d):
        raise ConfigurationError("inconsistent A, B, K shapes")
    params = np.concatenate([[d, m], A.ravel(), B.ravel(), K.ravel()])
    return ControlAffineSystem(
        d=d,
        m=m,
        drift=lambda x: A @ x,
        channels=lambda x: B,
        feedback=lambda x: -K @ x,
        jacobian=lambda x: A - B @ K,
        kernel=Kernel(_linear_rhs, _linear_post, params),
        name=name,
    )


def build_linear_system(params: CartPendulumMassSpringParams, gain: GainMatrix) -> ControlAffineSystem:
    if not gain.is_hurwitz:
        raise ConfigurationError("gain is not certified Hurwitz")
    A, B = coupled_matrices(params)
    return linear_system(A, B, gain.K, name="coupled-linear")


# --------------------------------------------------------------------------
# spacecraft


@dataclass(frozen=True)
class SpacecraftParams:
    """Rigid spacecraft and controller ``u = -k1 qv - k2 (w - omega_bar e1)``."""

    J: tuple = ((100.0, 0.0, 0.0), (0.0, 70.0, 0.0), (0.0, 0.0, 150.0))
    k1: float = 0.5
    k2: float = 0.1
    quaternion_init: tuple = (1.0, 0.0, 0.0, 0.0)
    omega_init: tuple = (0.01, 0.05, 0.03)
    omega_bar: float = 0.0
    sim_horizon: float = 200.0
    step: float = 0.1

    def __post_init__(self):
        J = self.inertia
        if J.shape != (3, 3) or not np.allclose(J, J.T, rtol=0, atol=1e-12):
            raise ConfigurationError("J must be a symmetric 3x3 matrix")
        if np.min(np.linalg.eigvalsh(J)) <= 0:
            raise ConfigurationError("J must be positive definite")
        q = np.asarray(self.quaternion_init, dtype=float)
        if q.shape != (4,) or abs(q @ q - 1.0) > 1e-12:
            raise ConfigurationError(f"initial quaternion must be unit norm, got {q}")
        if len(self.omega_init) != 3:
            raise ConfigurationError("omega_init must have 3 entries")
        if self.k1 < 0 or self.k2 < 0:
            raise ConfigurationError("controller gains must be non-negative")

    @property
    def inertia(self) -> np.ndarray:
        return np.array(self.J, dtype=float)


def _qmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.concatenate([[a[0] * b[0] - a[1:] @ b[1:]],
                           a[0] * b[1:] + b[0] * a[1:] + np.cross(a[1:], b[1:])])


def spacecraft_rhs(params: SpacecraftParams, state, torque) -> np.ndarray:
    """Quaternion kinematics and Euler's equations in absolute coordinates."""
    s = np.asarray(state, dtype=float)
    q0, qv, w = s[0], s[1:4], s[4:7]
    J = params.inertia
    tq = np.asarray(torque, dtype=float)
    return np.concatenate([
        [-0.5 * qv @ w],
        0.5 * (q0 * w + np.cross(qv, w)),
        np.linalg.solve(J, -np.cross(w, J @ w) + tq),
    ])


def spacecraft_controller(params: SpacecraftParams, state) -> np.ndarray:
    """PD torque on an absolute state ``(q0, qv, w)``."""
    s = np.asarray(state, dtype=float)
    return -params.k1 * s[1:4] - params.k2 * (s[4:7] - np.array([params.omega_bar, 0.0, 0.0]))


def renormalize_quaternion(state) -> np.ndarray:
    """Rescale the quaternion part of ``(q0, qv, w)`` to unit norm."""
    s = np.array(state, dtype=float)
    n = np.linalg.norm(s[:4])
    if n < 1e-6:
        raise IntegrityError(f"quaternion norm {n} too small to renormalize")
    s[:4] /= n
    return s


def equilibrium(params: SpacecraftParams) -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0, params.omega_bar, 0.0, 0.0])


def to_shifted(params: SpacecraftParams, state) -> np.ndarray:
    return np.asarray(state, dtype=float) - equilibrium(params)


def from_shifted(params: SpacecraftParams, x) -> np.ndarray:
    return np.asarray(x, dtype=float) + equilibrium(params)


def spacecraft_initial_state(params: SpacecraftParams) -> np.ndarray:
    """Initial condition in shifted coordinates."""
    return to_shifted(params, np.concatenate([params.quaternion_init, params.omega_init]))


@njit(cache=True)
def _spacecraft_rhs(t, x, k, c, p, out):
    # p = [J (9, row-major), Jinv (9), k1, k2, omega_bar]
    wb = p[20]
    q0 = x[0] + 1.0
    q1 = x[1]
    q2 = x[2]
    q3 = x[3]
    w1 = x[4] + wb
    w2 = x[5]
    w3 = x[6]
    r1 = w1 - wb
    out[0] = -0.5 * (q1 * w1 + q2 * w2 + q3 * w3) + 0.5 * wb * q1
    out[1] = 0.5 * (q0 * w1 + q2 * w3 - q3 * w2) - 0.5 * wb * q0
    out[2] = 0.5 * (q0 * w2 + q3 * w1 - q1 * w3) - 0.5 * wb * (-q3)
    out[3] = 0.5 * (q0 * w3 + q1 * w2 - q2 * w1) - 0.5 * wb * q2
    h1 = p[0] * w1 + p[1] * w2 + p[2] * w3
    h2 = p[3] * w1 + p[4] * w2 + p[5] * w3
    h3 = p[6] * w1 + p[7] * w2 + p[8] * w3
    e1 = -(w2 * h3 - w3 * h2)
    e2 = -(w3 * h1 - w1 * h3)
    e3 = -(w1 * h2 - w2 * h1)
    k1 = p[18]
    k2 = p[19]
    u1 = -k1 * q1 - k2 * r1
    u2 = -k1 * q2 - k2 * w2
    u3 = -k1 * q3 - k2 * w3
    if k == 0:
        e1 += u1
        e2 += u2
        e3 += u3
    elif k == 1:
        e1 += c * u1
    elif k == 2:
        e2 += c * u2
    else:
        e3 += c * u3
    out[4] = p[9] * e1 + p[10] * e2 + p[11] * e3
    out[5] = p[12] * e1 + p[13] * e2 + p[14] * e3
    out[6] = p[15] * e1 + p[16] * e2 + p[17] * e3


@njit(cache=True)
def _spacecraft_post(x, p):
    q0 = x[0] + 1.0
    n = math.sqrt(q0 * q0 + x[1] * x[1] + x[2] * x[2] + x[3] * x[3])
    if n < 1e-6:
        raise ValueError("quaternion norm collapsed")
    x[0] = q0 / n - 1.0
    x[1] /= n
    x[2] /= n
    x[3] /= n


def build_spacecraft_system(params: SpacecraftParams) -> ControlAffineSystem:
    """7-state, 3-channel system in shifted coordinates; channel k torques body axis k."""
    J = params.inertia
    Jinv = np.linalg.inv(J)
    wb = params.omega_bar
    w_ref = np.array([0.0, wb, 0.0, 0.0])
    e0 = np.array([1.0, 0.0, 0.0, 0.0])
    G = np.zeros((7, 3))
    G[4:, :] = Jinv

    def drift(x):
        q = x[:4] + e0
        w = x[4:] + np.array([wb, 0.0, 0.0])
        qdot = 0.5 * (_qmul(q, np.concatenate([[0.0], w])) - _qmul(w_ref, q))
        return np.concatenate([qdot, Jinv @ (-np.cross(w, J @ w))])

    def feedback(x):
        return -params.k1 * x[1:4] - params.k2 * x[4:7]

    def project(x):
        s = renormalize_quaternion(x + np.concatenate([e0, np.zeros(3)]))
        s[0] -= 1.0
        return s

    kparams = np.concatenate([J.ravel(), Jinv.ravel(), [params.k1, params.k2, wb]])
    return ControlAffineSystem(
        d=7,
        m=3,
        drift=drift,
        channels=lambda x: G,
        feedback=feedback,
        project=project,
        kernel=Kernel(_spacecraft_rhs, _spacecraft_post, kparams),
        name="spacecraft" if wb == 0 else "spacecraft-spin",
    )


def sample_omega_ball(radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample from the closed 3-ball of the given radius."""
    v = rng.normal(size=3)
    return radius * rng.uniform() ** (1.0 / 3.0) * v / np.linalg.norm(v)


def kinetic_energy(params: SpacecraftParams, omega) -> float:
    w = np.asarray(omega, dtype=float)
    return 0.5 * float(w @ params.inertia @ w)


# --------------------------------------------------------------------------
# presets

SPIN_PARAMS = SpacecraftParams(k1=50.0, k2=80.0, omega_bar=1.0, omega_init=(1.0, 0.0, 0.0),
                               sim_horizon=400.0)

PRESETS = {
    "coupled-linear": CartPendulumMassSpringParams(),
    "spacecraft": SpacecraftParams(),
    "spacecraft-spin": SPIN_PARAMS,
}

_UNITS = {
    "M": ("Mass of the cart", "kg"),
    "mp": ("Mass of the pendulum", "kg"),
    "L": ("L (pendulum length)", "m"),
    "g": ("Acceleration due to gravity", "m/s^2"),
    "sim_horizon": ("Time of simulation", "s"),
    "tau": ("Switching time", "s"),
    "step": ("Step length", "s"),
    "x0": ("Initial condition", "(m, rad, m/s, rad/s, m, m/s)"),
    "lqr_q": ("LQR state weights Q = diag(q)", ""),
    "lqr_r": ("LQR input weight R = r*I", ""),
    "J": ("Inertia of spacecraft", "kg m^2"),
    "k1": ("k1", ""),
    "k2": ("k2", ""),
    "quaternion_init": ("Initial value of the quaternion", ""),
    "omega_init": ("Initial value of the angular velocities", "rad/s"),
    "omega_bar": ("Reference spin about body x", "rad/s"),
}


def describe_preset(name: str) -> list[str]:
    p = PRESETS[name]
    lines = [name]
    if isinstance(p, SpacecraftParams):
        lines.append(f"  k1: {p.k1}, k2: {p.k2}")
    for key, value in asdict(p).items():
        label, unit = _UNITS.get(key, (key, ""))
        if key in ("k1", "k2") and isinstance(p, SpacecraftParams):
            continue
        if key == "L":
            lines.append(f"  L: {value:g} m (not specified in the source tables; default choice)")
            continue
        if key == "J":
            value = "diag(" + ", ".join(f"{p.inertia[i, i]:g}" for i in range(3)) + ")"
        lines.append(f"  {label}: {_fmt(value)} {unit}".rstrip())
    return lines


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:g}"
    if isinstance(v, (tuple, list)):
        return "(" + ", ".join(_fmt(e) for e in v) + ")"
    return str(v)
