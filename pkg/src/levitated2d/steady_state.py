"""Drift/diffusion matrices and the steady-state covariance from the Lyapunov equation.

State ordering is ``u = (Q, P, x, p_x, y, p_y)``; ``V_ij = <{u_i, u_j}>/2`` in
units where the vacuum has unit variance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedWarning, InstabilityError, ValidationError
from .model import SystemParams

BASIS = ("Q", "P", "x", "px", "y", "py")
MECHANICAL_BASIS = BASIS[2:]

STABILITY_MARGIN = 1e-6  # rad/s
RESIDUAL_BOUND = 1e-10


def build_drift(params: SystemParams) -> np.ndarray:
    k2 = 0.5 * params.kappa
    A = np.zeros((6, 6))
    A[0, 0] = -k2
    A[0, 1] = -params.detuning
    A[1, 0] = params.detuning
    A[1, 1] = -k2
    A[1, 2] = 2.0 * params.g_x
    A[1, 4] = 2.0 * params.g_y
    A[2, 3] = params.omega_x
    A[3, 0] = 2.0 * params.g_x
    A[3, 2] = -params.omega_x
    A[3, 3] = -params.gamma_x
    A[4, 5] = params.omega_y
    A[5, 0] = 2.0 * params.g_y
    A[5, 4] = -params.omega_y
    A[5, 5] = -params.gamma_y
    return A


def build_diffusion(params: SystemParams) -> np.ndarray:
    return np.diag([params.kappa, params.kappa, 0.0, 4.0 * params.Gamma_x, 0.0, 4.0 * params.Gamma_y])


@dataclass(frozen=True)
class Stability:
    stable: bool
    abscissa: float
    status: str  # "stable", "marginal" or "unstable"

    def __bool__(self):
        return self.stable


def check_stability(A: np.ndarray, margin: float = STABILITY_MARGIN) -> Stability:
    """Classify ``A`` by its spectral abscissa (largest real part of the eigenvalues).

    Anything within ``margin`` of the imaginary axis is "marginal" and is not
    treated as stable.
    """
    abscissa = float(np.max(np.linalg.eigvals(A).real))
    if abscissa < -margin:
        status = "stable"
    elif abscissa <= margin:
        status = "marginal"
    else:
        status = "unstable"
    return Stability(status == "stable", abscissa, status)


def _lyapunov_operator(A):
    n = A.shape[0]
    eye = np.eye(n)
    # column-major vec: vec(AV + VA^T) = (I kron A + A kron I) vec(V)
    return np.kron(eye, A) + np.kron(A, eye)


def lyapunov_residual(A, V, D) -> float:
    """``max|AV + VA^T + D| / max|D|`` (absolute when D vanishes)."""
    r = np.max(np.abs(A @ V + V @ A.T + D))
    scale = np.max(np.abs(D))
    return float(r / scale) if scale > 0 else float(r)


def solve_lyapunov(A: np.ndarray, D: np.ndarray, check: bool = True) -> np.ndarray:
    """Solve ``A V + V A^T = -D`` by a dense solve of the vectorized system.

    One step of iterative refinement is applied; the result is symmetrized.
    Raises :class:`InstabilityError` if ``A`` is not stable.
    """
    A = np.asarray(A, dtype=float)
    D = np.asarray(D, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or D.shape != (n, n):
        raise ValidationError("A and D must be square matrices of equal size")
    if check:
        stab = check_stability(A)
        if not stab.stable:
            raise InstabilityError(
                f"drift matrix is {stab.status} (spectral abscissa {stab.abscissa:.6g} rad/s); "
                "no steady state", abscissa=stab.abscissa)
    L = _lyapunov_operator(A)
    rhs = -D.reshape(-1, order="F")
    v = np.linalg.solve(L, rhs)
    v += np.linalg.solve(L, rhs - L @ v)
    V = v.reshape(n, n, order="F")
    V = 0.5 * (V + V.T)
    res = lyapunov_residual(A, V, D)
    if res >= RESIDUAL_BOUND:
        warnings.warn(f"Lyapunov residual {res:.3g} exceeds {RESIDUAL_BOUND:g}", IllConditionedWarning,
                      stacklevel=2)
    return V


def mechanical_block(V: np.ndarray) -> np.ndarray:
    """The 4x4 covariance of ``(x, p_x, y, p_y)``: last four rows and columns."""
    V = np.asarray(V, dtype=float)
    if V.shape != (6, 6):
        raise ValidationError("expected a 6x6 covariance matrix")
    return V[2:, 2:].copy()


def steady_state(params: SystemParams) -> np.ndarray:
    """Full 6x6 steady-state covariance for ``params``."""
    return solve_lyapunov(build_drift(params), build_diffusion(params))


def covariance_json(V: np.ndarray) -> dict:
    """JSON-ready export of V and its mechanical block."""
    V = np.asarray(V, dtype=float)
    return {
        "basis": list(BASIS),
        "V": V.tolist(),
        "mechanical_basis": list(MECHANICAL_BASIS),
        "V_M": mechanical_block(V).tolist(),
    }
