"""Case-study plants: coupled linear system and rigid spacecraft."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from rrsim.dynamics import eval_nominal_rhs
from rrsim.errors import ConfigurationError, IntegrityError
from rrsim.integrator import IntegratorConfig, integrate
from rrsim.lqr import GainMatrix
from rrsim.scheduling import ConstantSchedule
from rrsim.systems import (PRESETS, SPIN_PARAMS, CartPendulumMassSpringParams, SpacecraftParams,
                           build_linear_system, build_spacecraft_system, coupled_gain,
                           coupled_matrices, describe_preset, from_shifted, kinetic_energy,
                           renormalize_quaternion, sample_omega_ball, spacecraft_controller,
                           spacecraft_initial_state, spacecraft_rhs, to_shifted)


def test_coupled_matrix_entries():
    A, B = coupled_matrices(CartPendulumMassSpringParams())
    assert A[1, 2] == pytest.approx(-0.8175, abs=1e-15)
    assert A[3, 2] == pytest.approx((0.25 + 3.0) * 9.81 / 3.0, rel=1e-15)
    assert A[3, 2] == pytest.approx(10.6275, abs=1e-12)
    assert B[5, 1] == 1.0
    assert B[5, 0] == 0.1
    assert B[1, 1] == 0.1 and B[3, 1] == 0.1


def test_coupled_system_structure():
    p = CartPendulumMassSpringParams()
    g = coupled_gain(p)
    sys_ = build_linear_system(p, g)
    A, B = coupled_matrices(p)
    assert (sys_.d, sys_.m) == (6, 2)
    x = np.arange(6.0)
    np.testing.assert_allclose(sys_.drift(x), A @ x)
    np.testing.assert_allclose(sys_.channels(x), B)
    np.testing.assert_allclose(sys_.feedback(x), -g.K @ x)
    np.testing.assert_allclose(eval_nominal_rhs(sys_, x), (A - B @ g.K) @ x, atol=1e-12)


def test_closed_loop_eigenvalues_stable_by_independent_routine():
    p = CartPendulumMassSpringParams()
    A, B = coupled_matrices(p)
    K = coupled_gain(p).K
    # power-iteration-free check: scipy's Schur form, not numpy's eig used by the synthesizer
    from scipy.linalg import schur
    T, _ = schur(A - B @ K, output="complex")
    assert np.all(np.diag(T).real < 0)


def test_build_rejects_non_hurwitz_gain():
    p = CartPendulumMassSpringParams()
    with pytest.raises(ConfigurationError):
        build_linear_system(p, GainMatrix(np.zeros((2, 6)), -1.0))


def test_params_validation():
    with pytest.raises(ConfigurationError):
        CartPendulumMassSpringParams(L=0.0)
    with pytest.raises(ConfigurationError):
        SpacecraftParams(quaternion_init=(1.0, 0.1, 0.0, 0.0))
    with pytest.raises(ConfigurationError):
        SpacecraftParams(J=((1.0, 0.5, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)))
    with pytest.raises(ConfigurationError):
        SpacecraftParams(J=((1.0, 0.0, 0.0), (0.0, -1.0, 0.0), (0.0, 0.0, 1.0)))


def test_spacecraft_rhs_examples():
    p = SpacecraftParams()
    assert np.all(spacecraft_rhs(p, [1, 0, 0, 0, 0, 0, 0], np.zeros(3)) == 0.0)
    d = spacecraft_rhs(p, [1, 0, 0, 0, 0.01, 0.05, 0.03], np.zeros(3))
    np.testing.assert_allclose(d[4:], [-0.0012, 0.015 / 70, 0.0001], rtol=1e-12)
    np.testing.assert_allclose(d[:4], [0.0, 0.005, 0.025, 0.015], rtol=1e-12)


def test_spacecraft_controller_examples():
    p = SpacecraftParams()
    assert np.all(spacecraft_controller(p, [1, 0, 0, 0, 0, 0, 0]) == 0.0)
    np.testing.assert_allclose(spacecraft_controller(p, [1, 0.1, 0, 0, 0.2, 0, 0]), [-0.07, 0, 0],
                               rtol=1e-12)
    spin = dataclasses.replace(p, omega_bar=1.0)
    assert np.all(spacecraft_controller(spin, [1, 0, 0, 0, 1.0, 0, 0]) == 0.0)


def test_built_feedback_equals_pd_law():
    p = SpacecraftParams()
    sys_ = build_spacecraft_system(p)
    rng = np.random.default_rng(5)
    for _ in range(20):
        q = rng.normal(size=4)
        state = np.concatenate([q / np.linalg.norm(q), rng.normal(size=3)])
        np.testing.assert_allclose(sys_.feedback(to_shifted(p, state)), spacecraft_controller(p, state),
                                   rtol=1e-14, atol=1e-15)


def test_shifted_field_matches_absolute_field_without_spin():
    p = SpacecraftParams()
    sys_ = build_spacecraft_system(p)
    rng = np.random.default_rng(6)
    for _ in range(20):
        q = rng.normal(size=4)
        state = np.concatenate([q / np.linalg.norm(q), rng.normal(size=3) * 0.1])
        expected = spacecraft_rhs(p, state, spacecraft_controller(p, state))
        np.testing.assert_allclose(eval_nominal_rhs(sys_, to_shifted(p, state)), expected, atol=1e-15)


def test_spacecraft_channels_and_equilibrium():
    p = SpacecraftParams()
    sys_ = build_spacecraft_system(p)
    G = sys_.channels(np.zeros(7))
    g2 = G[:, 1]
    assert np.count_nonzero(g2) == 1
    assert g2[5] == pytest.approx(1 / 70, rel=1e-15)
    assert np.all(sys_.feedback(np.zeros(7)) == 0.0)
    assert np.all(sys_.drift(np.zeros(7)) == 0.0)
    spin = build_spacecraft_system(SPIN_PARAMS)
    assert np.all(spin.drift(np.zeros(7)) == 0.0)


@pytest.mark.parametrize("params", [SpacecraftParams(), SPIN_PARAMS])
def test_kernel_matches_python_field(params):
    sys_ = build_spacecraft_system(params)
    rng = np.random.default_rng(7)
    out = np.empty(7)
    for _ in range(20):
        x = rng.normal(size=7) * 0.3
        for k in range(4):
            sys_.kernel.rhs(0.0, x, k, 3.0, sys_.kernel.params, out)
            if k == 0:
                expected = eval_nominal_rhs(sys_, x)
            else:
                expected = sys_.drift(x) + 3.0 * sys_.channel(x, k) * sys_.feedback(x)[k - 1]
            np.testing.assert_allclose(out, expected, rtol=1e-13, atol=1e-15)


def test_renormalize_examples():
    w = [0.1, 0.2, 0.3]
    np.testing.assert_array_equal(renormalize_quaternion([1, 0, 0, 0, *w]), [1, 0, 0, 0, *w])
    np.testing.assert_allclose(renormalize_quaternion([2, 0, 0, 0, *w]), [1, 0, 0, 0, *w])
    s = renormalize_quaternion([0.999999, 0, 0, 0, *w])
    assert abs(np.linalg.norm(s[:4]) - 1.0) < 1e-15
    with pytest.raises(IntegrityError):
        renormalize_quaternion([1e-7, 0, 0, 0, *w])


def test_shift_round_trip():
    p = SPIN_PARAMS
    state = np.array([0.5, 0.5, 0.5, 0.5, 1.2, 0.1, -0.3])
    np.testing.assert_allclose(from_shifted(p, to_shifted(p, state)), state)
    np.testing.assert_allclose(spacecraft_initial_state(p), np.zeros(7))


def test_uncontrolled_body_conserves_kinetic_energy():
    p = dataclasses.replace(SpacecraftParams(), k1=0.0, k2=0.0)
    sys_ = build_spacecraft_system(p)
    x0 = spacecraft_initial_state(p)
    traj = integrate(sys_, x0, IntegratorConfig(0.1, 200.0))
    e = np.array([kinetic_energy(p, x[4:]) for x in traj.states])
    assert np.max(np.abs(e - e[0])) / e[0] < 1e-8


def test_quaternion_norm_preserved_on_switched_run():
    p = SpacecraftParams()
    sys_ = build_spacecraft_system(p)
    traj = integrate(sys_, spacecraft_initial_state(p), IntegratorConfig(0.1, 200.0), ConstantSchedule(0.1, 3))
    norms = np.linalg.norm(traj.states[:, :4] + np.array([1.0, 0, 0, 0]), axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-6


def test_omega_ball_sampling():
    rng = np.random.default_rng(0)
    pts = np.array([sample_omega_ball(0.5, rng) for _ in range(4000)])
    r = np.linalg.norm(pts, axis=1)
    assert np.all(r <= 0.5)
    # uniform in volume: P(r < R/2) = 1/8
    assert abs(np.mean(r < 0.25) - 0.125) < 0.02


def test_preset_descriptions():
    text = "\n".join(line for name in PRESETS for line in describe_preset(name))
    assert "Mass of the cart: 3 kg" in text
    assert "k1: 0.5, k2: 0.1" in text
    assert "L: 1 m" in text
    assert "diag(100, 70, 150)" in text
