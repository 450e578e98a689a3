"""LQR synthesis by Kleinman-Newton iteration."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.linalg import solve_continuous_are

from rrsim.errors import SynthesisError
from rrsim.lqr import hurwitz_margin, kleinman_newton, lyapunov_solve, synthesize_gain
from rrsim.systems import CartPendulumMassSpringParams, coupled_matrices


def char_poly(M: np.ndarray) -> np.ndarray:
    """Faddeev-LeVerrier coefficients of det(sI - M), highest power first."""
    n = M.shape[0]
    coeffs = [1.0]
    Mk = np.zeros_like(M)
    for k in range(1, n + 1):
        Mk = M @ Mk + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(M @ Mk) / k)
    return np.array(coeffs)


def routh_hurwitz(coeffs: np.ndarray) -> bool:
    """True iff every root of the polynomial has negative real part."""
    a = np.asarray(coeffs, dtype=float) / coeffs[0]
    n = len(a) - 1
    rows = [a[0::2].copy(), a[1::2].copy()]
    width = len(rows[0])
    rows = [np.pad(r, (0, width - len(r))) for r in rows]
    for _ in range(n - 1):
        r0, r1 = rows[-2], rows[-1]
        if r1[0] <= 0:
            return False
        new = np.zeros(width)
        for j in range(width - 1):
            new[j] = (r1[0] * r0[j + 1] - r0[0] * r1[j + 1]) / r1[0]
        rows.append(new)
    return all(r[0] > 0 for r in rows[: n + 1])


def test_oracles_on_known_polynomials():
    np.testing.assert_allclose(char_poly(np.diag([-1.0, -2.0])), [1, 3, 2])
    assert routh_hurwitz(np.array([1.0, 3.0, 2.0]))
    assert not routh_hurwitz(np.array([1.0, -1.0, 2.0]))
    assert routh_hurwitz(np.poly([-1, -2 + 1j, -2 - 1j, -0.1]).real)
    assert not routh_hurwitz(np.poly([-1, 0.5 + 1j, 0.5 - 1j]).real)


def test_scalar_riccati_example():
    g = synthesize_gain([[-1.0]], [[1.0]], [[1.0]], [[1.0]])
    assert g.K[0, 0] == pytest.approx(math.sqrt(2) - 1, abs=1e-10)
    assert g.is_hurwitz


def test_hurwitz_plant_only_margin_asserted():
    A = np.diag([-1.0, -3.0])
    g = synthesize_gain(A, np.eye(2))
    assert g.hurwitz_margin > 0


def test_coupled_gain_is_certified_by_independent_oracle():
    A, B = coupled_matrices(CartPendulumMassSpringParams())
    for R in (np.eye(2), 0.02 * np.eye(2)):
        g = synthesize_gain(A, B, np.eye(6), R)
        assert g.hurwitz_margin > 0
        assert routh_hurwitz(char_poly(A - B @ g.K))


def test_matches_scipy_riccati():
    A, B = coupled_matrices(CartPendulumMassSpringParams())
    Q, R = np.eye(6), 0.3 * np.eye(2)
    P = solve_continuous_are(A, B, Q, R)
    g = synthesize_gain(A, B, Q, R)
    np.testing.assert_allclose(g.K, np.linalg.solve(R, B.T @ P), rtol=1e-8, atol=1e-9)


def test_lyapunov_solution_residual():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(4, 4)) - 4 * np.eye(4)
    Q = np.eye(4)
    P = lyapunov_solve(A, Q)
    np.testing.assert_allclose(A.T @ P + P @ A + Q, 0, atol=1e-12)


def test_newton_budget_exhaustion_raises():
    A, B = coupled_matrices(CartPendulumMassSpringParams())
    K0 = synthesize_gain(A, B).K + 0.5
    with pytest.raises(SynthesisError):
        kleinman_newton(A, B, np.eye(6), np.eye(2), K0, max_iter=1)


def test_unstabilizable_pair_fails():
    A = np.diag([1.0, -1.0])
    B = np.array([[0.0], [1.0]])
    with pytest.raises(SynthesisError):
        synthesize_gain(A, B)


def test_hurwitz_margin_sign():
    assert hurwitz_margin(np.diag([-1.0, -2.0])) == pytest.approx(1.0)
    assert hurwitz_margin(np.diag([1.0, -2.0])) < 0
