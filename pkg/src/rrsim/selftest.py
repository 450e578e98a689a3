"""Quick invariant checks runnable without the test suite (``rrsim selftest``)."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from rrsim.bounds import geometric_bound, geometric_bound_tv, settling_time
from rrsim.chatter import chatter_defect, chatter_subdivide
from rrsim.dynamics import ControlAffineSystem, eval_nominal_rhs, eval_switched_rhs, validate_premise
from rrsim.integrator import IntegratorConfig, convergence_order, integrate
from rrsim.lqr import synthesize_gain
from rrsim.scheduling import ConstantSchedule, active_index
from rrsim.systems import (CartPendulumMassSpringParams, SpacecraftParams, build_linear_system,
                           build_spacecraft_system, coupled_gain)


def _index_oracle(s: Fraction, tau: Fraction, m: int) -> int:
    return 1 + math.floor(s / tau) % m


def check_round_robin_index() -> bool:
    rng = np.random.default_rng(0)
    for _ in range(200):
        m = int(rng.integers(1, 6))
        tau = Fraction(int(rng.integers(1, 50)), int(rng.integers(1, 50)))
        s = Fraction(int(rng.integers(0, 10_000)), 97)
        sched = ConstantSchedule(float(tau), m)
        # skip points too close to a switch for float evaluation to be meaningful
        frac = s / tau - math.floor(s / tau)
        if min(frac, 1 - frac) < Fraction(1, 10**9):
            continue
        if active_index(sched, float(s)) != _index_oracle(s, tau, m):
            return False
    return True


def check_cycle_average() -> bool:
    rng = np.random.default_rng(1)
    p = CartPendulumMassSpringParams()
    sys_ = build_linear_system(p, coupled_gain(p))
    sched = ConstantSchedule(0.5, sys_.m)
    x = rng.normal(size=sys_.d)
    avg = sum(eval_switched_rhs(sys_, x, (k + 0.5) * sched.tau, sched) for k in range(sys_.m)) / sys_.m
    return bool(np.allclose(avg, eval_nominal_rhs(sys_, x), rtol=1e-12, atol=1e-12))


def check_rk4_order() -> bool:
    decay = ControlAffineSystem.autonomous(lambda x: -x, 1)
    order = convergence_order(decay, [1.0], 0.0, 1.0, step=0.1)
    traj = integrate(decay, [1.0], IntegratorConfig(0.01, 1.0))
    return 3.8 <= order <= 4.2 and abs(traj.final_state[0] - math.exp(-1)) < 1e-9


def check_lqr_scalar() -> bool:
    g = synthesize_gain([[-1.0]], [[1.0]])
    return abs(g.K[0, 0] - (math.sqrt(2) - 1)) < 1e-10 and g.is_hurwitz


def check_premise() -> bool:
    p = CartPendulumMassSpringParams()
    return (validate_premise(build_linear_system(p, coupled_gain(p))) == []
            and validate_premise(build_spacecraft_system(SpacecraftParams())) == [])


def check_chatter() -> bool:
    rng = np.random.default_rng(2)
    F = rng.normal(size=(3, 4))
    w = np.full(3, 1 / 3)
    s8 = chatter_subdivide([0.0, 1.0], w, 8)
    s16 = chatter_subdivide([0.0, 1.0], w, 16)
    whole = chatter_defect(F, w, s8, [(s8.block_edges[1], s8.block_edges[5])])
    ratio = chatter_defect(F, w, s8) / chatter_defect(F, w, s16)
    return whole == 0.0 and abs(ratio - 2.0) < 0.1


def check_bounds() -> bool:
    gb = geometric_bound(1.0, 1.0, math.log(2.0), 1.0, 3)
    tv = geometric_bound_tv(1.0, 1.0, math.log(4.0), 1.0, 0.5, 2)
    return (abs(gb.limit - 3.0) < 1e-12 and abs(tv.collapsed - 0.75) < 1e-12
            and abs(settling_time(0.02, 1.0, 1.0, 0.5, 5.0) - math.log(0.01) / math.log(0.5)) < 1e-12)


CHECKS = {
    "round-robin index vs exact rational oracle": check_round_robin_index,
    "cycle average of switched field equals nominal field": check_cycle_average,
    "RK4 order and exp(-1) oracle": check_rk4_order,
    "scalar LQR gain sqrt(2) - 1": check_lqr_scalar,
    "premise checks on built-in systems": check_premise,
    "chattering defect cancellation and scaling": check_chatter,
    "bound formula examples": check_bounds,
}


def run_selftest(echo=print) -> bool:
    ok = True
    for name, check in CHECKS.items():
        try:
            passed = bool(check())
        except Exception as exc:  # report, don't abort the remaining checks
            passed = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        ok &= passed
        echo(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
