"""Continuous-time LQR by Kleinman-Newton iteration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rrsim.errors import SynthesisError

MAX_ITER = 200


@dataclass(frozen=True)
class GainMatrix:
    """Feedback gain ``K`` (``u = -K x``) with ``min(-Re eig(A - B K))``."""

    K: np.ndarray
    hurwitz_margin: float

    @property
    def is_hurwitz(self) -> bool:
        return self.hurwitz_margin > 0


def hurwitz_margin(M: np.ndarray) -> float:
    return float(np.min(-np.linalg.eigvals(M).real))


def lyapunov_solve(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve ``A^T P + P A + Q = 0`` by Kronecker vectorization."""
    n = A.shape[0]
    eye = np.eye(n)
    L = np.kron(eye, A.T) + np.kron(A.T, eye)
    vec = np.linalg.solve(L, -Q.reshape(-1, order="F"))
    P = vec.reshape(n, n, order="F")
    return 0.5 * (P + P.T)


def kleinman_newton(A, B, Q, R, K0, tol: float = 1e-12, max_iter: int = MAX_ITER):
    """Newton iteration on the Riccati equation from a stabilizing ``K0``.

    Returns ``(P, K, iterations)``.
    """
    Rinv_BT = np.linalg.solve(R, B.T)
    K = K0
    P_prev = None
    for it in range(1, max_iter + 1):
        Acl = A - B @ K
        try:
            P = lyapunov_solve(Acl, Q + K.T @ R @ K)
        except np.linalg.LinAlgError:
            raise SynthesisError("singular Lyapunov equation; (A, B) may not be stabilizable") from None
        K = Rinv_BT @ P
        if P_prev is not None and np.linalg.norm(P - P_prev) <= tol * (1.0 + np.linalg.norm(P)):
            return P, K, it
        P_prev = P
    raise SynthesisError(f"Riccati iteration did not converge in {max_iter} iterations")


def synthesize_gain(A, B, Q=None, R=None) -> GainMatrix:
    """LQR gain ``K = R^-1 B^T P`` with its Hurwitz certificate.

    A stabilizing start is found by continuation on the shift ``alpha``:
    ``K = 0`` stabilizes ``A - alpha I`` for ``alpha > max Re eig(A)``; each
    Riccati solution at ``alpha`` remains stabilizing for a smaller shift, so
    ``alpha`` is walked down to 0 reusing the previous gain.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n, m = B.shape
    Q = np.eye(n) if Q is None else np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.eye(m) if R is None else np.atleast_2d(np.asarray(R, dtype=float))

    I = np.eye(n)
    alpha = max(0.0, float(np.max(np.linalg.eigvals(A).real))) + 1.0
    K = np.zeros((m, n))
    budget = MAX_ITER
    while True:
        if hurwitz_margin(A - B @ K) > 0:
            alpha = 0.0
        P, K, used = kleinman_newton(A - alpha * I, B, Q, R, K, max_iter=budget)
        budget -= used
        if alpha == 0.0:
            break
        margin = hurwitz_margin(A - alpha * I - B @ K)
        alpha = max(0.0, alpha - 0.9 * margin)
        if budget <= 0:
            raise SynthesisError("shift continuation exhausted the iteration budget")
    margin = hurwitz_margin(A - B @ K)
    if margin <= 0:
        raise SynthesisError(f"synthesized loop is not Hurwitz (margin {margin})")
    return GainMatrix(K=K, hurwitz_margin=margin)
