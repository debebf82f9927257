"""Stochastic time-domain integration of the linearized Langevin equations.

Noise is classical and symmetrized: each optical input quadrature and each
mechanical force is white with unit two-sided density, so the diffusion
matrix is exactly ``Diag[kappa, kappa, 0, 4 Gamma_x, 0, 4 Gamma_y]``. Operator
ordering (the quantum sideband asymmetry) is outside the simulator's reach.

Reproducibility: trajectory ``i`` draws from its own Philox stream keyed by
``(seed, i)`` and is integrated on its own, so results do not depend on how
trajectories are distributed across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import expm
from scipy.signal import lfilter, welch

from .errors import InstabilityError, NumericalError, SimulationDivergedError, ValidationError
from .model import SystemParams
from .steady_state import build_diffusion, build_drift, check_stability

DIVERGENCE_LIMIT = 1e9
RESOLUTION_GUARD = 0.05
SIM_KEYS = ("dt", "duration", "burn_in", "n_trajectories", "seed", "method", "record_every")
_CHUNK = 1 << 16


@dataclass(frozen=True)
class SimConfig:
    dt: float
    duration: float
    burn_in: float = 0.0
    n_trajectories: int = 1
    seed: int = 0
    method: str = "exact"  # "exact" (exact Gaussian transition) or "euler" (Euler-Maruyama)
    record_every: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and self.duration > 0):
            raise ValidationError("dt and duration must be > 0")
        if self.burn_in < 0 or self.burn_in >= self.duration:
            raise ValidationError("burn_in must lie in [0, duration)")
        if int(self.n_trajectories) != self.n_trajectories or self.n_trajectories < 0:
            raise ValidationError("n_trajectories must be a non-negative integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if self.method not in ("euler", "exact"):
            raise ValidationError(f"unknown integration method {self.method!r}")
        if int(self.record_every) < 1:
            raise ValidationError("record_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    @classmethod
    def from_json(cls, cfg: dict) -> "SimConfig":
        unknown = sorted(set(cfg) - set(SIM_KEYS))
        if unknown:
            raise ValidationError(f"unknown simulation key: {unknown[0]}", key=unknown[0])
        return cls(**cfg)

    def to_json(self) -> dict:
        return asdict(self)


def validate_config(params: SystemParams, config: SimConfig) -> float:
    """Check the resolution and burn-in guards; returns the spectral abscissa."""
    fastest = max(params.omega_x, params.omega_y, params.kappa, abs(params.detuning))
    if config.dt * fastest >= RESOLUTION_GUARD:
        raise ValidationError(f"dt too coarse: dt * max rate = {config.dt * fastest:.3g} >= {RESOLUTION_GUARD}")
    stab = check_stability(build_drift(params))
    if not stab.stable:
        raise InstabilityError(f"drift matrix is {stab.status}; cannot simulate", abscissa=stab.abscissa)
    if config.burn_in < 10.0 / abs(stab.abscissa):
        raise ValidationError(f"burn_in must be >= 10 / |abscissa| = {10.0 / abs(stab.abscissa):.3g} s")
    return stab.abscissa


@dataclass
class Ensemble:
    """Trajectories sampled every ``dt * record_every``; ``states`` has shape (n_traj, n_samples, 6)."""

    time: np.ndarray
    states: np.ndarray
    config: SimConfig

    @property
    def sample_dt(self) -> float:
        return self.config.dt * self.config.record_every


def transition(A: np.ndarray, D: np.ndarray, dt: float, method: str):
    """One-step map ``u -> F u + L z`` with z standard normal.

    ``exact`` uses the matrix exponential and the Van Loan block construction
    for the accumulated noise covariance.
    """
    n = A.shape[0]
    if method == "euler":
        F = np.eye(n) + A * dt
        L = np.diag(np.sqrt(np.diag(D) * dt))
        return F, L
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = -A
    block[:n, n:] = D
    block[n:, n:] = A.T
    E = expm(block * dt)
    F = E[n:, n:].T
    Q = F @ E[:n, n:]
    Q = 0.5 * (Q + Q.T)
    w, U = np.linalg.eigh(Q)
    L = U * np.sqrt(np.clip(w, 0.0, None))
    return F, L


def _stream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed) % 2**64, int(index)]))


def _combine(M: np.ndarray, Z: np.ndarray) -> np.ndarray:
    # rows of Z times M^T; einsum without path optimization never dispatches to BLAS,
    # so the summation order is fixed whatever the threading
    return np.einsum("ij,kj->ki", M, Z, optimize=False)


class _Propagator:
    """Runs ``u <- F u + L z`` for one trajectory, in fixed-size chunks.

    When F is comfortably diagonalizable the recursion decouples into scalar
    first-order filters on the eigencoordinates, evaluated with ``lfilter``;
    otherwise a plain step loop is used.
    """

    def __init__(self, F, L):
        self.F, self.L = F, L
        lam, vec = np.linalg.eig(F)
        cond = np.linalg.cond(vec)
        self.modal = bool(np.isfinite(cond) and cond < 1e8)
        if self.modal:
            self.lam, self.vec = lam, vec
            drive = np.linalg.solve(vec, L.astype(complex))
            self.drive_re, self.drive_im = drive.real.copy(), drive.imag.copy()
            self.vec_re, self.vec_im = vec.real.copy(), vec.imag.copy()

    def run(self, u, z, rows):
        """Advance ``len(z)`` steps from ``u``; returns (states at ``rows``, final state)."""
        if not self.modal:
            out = np.empty_like(z)
            Lz = _combine(self.L, z)
            for k in range(z.shape[0]):
                u = _combine(self.F, u[None, :])[0] + Lz[k]
                out[k] = u
            return out[rows], u
        w0 = np.linalg.solve(self.vec, u.astype(complex))
        drive = _combine(self.drive_re, z) + 1j * _combine(self.drive_im, z)
        keep = np.append(rows, z.shape[0] - 1)
        w = np.empty((keep.size, self.lam.size), dtype=complex)
        for i, lam in enumerate(self.lam):
            w[:, i] = lfilter([1.0], [1.0, -lam], drive[:, i], zi=[lam * w0[i]])[0][keep]
        states = _combine(self.vec_re, w.real) - _combine(self.vec_im, w.imag)
        return states[:-1], states[-1]


def _integrate_one(prop, index, n_steps, record_every, seed, u0):
    gen = _stream(seed, index)
    n = u0.size
    out = np.empty((n_steps // record_every + 1, n))
    out[0] = u0
    u = u0.copy()
    step = 0
    while step < n_steps:
        m = min(_CHUNK, n_steps - step)
        rows = np.flatnonzero((np.arange(step + 1, step + m + 1) % record_every) == 0)
        recorded, u = prop.run(u, gen.standard_normal((m, n)), rows)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(recorded))) or max(
                np.max(np.abs(u)), np.max(np.abs(recorded), initial=0.0)) > DIVERGENCE_LIMIT:
            raise SimulationDivergedError(
                f"trajectory {index} exceeded {DIVERGENCE_LIMIT:g} before step {step + m}")
        out[(step + 1 + rows) // record_every] = recorded
        step += m
    return out


def integrate(params: SystemParams, config: SimConfig, u0=None, threads: int = 1,
              check: bool = True) -> Ensemble:
    """Integrate ``n_trajectories`` independent realizations from ``u0`` (default 0)."""
    if check:
        validate_config(params, config)
    A, D = build_drift(params), build_diffusion(params)
    F, L = transition(A, D, config.dt, config.method)
    n_steps = config.n_steps
    every = int(config.record_every)
    u0 = np.zeros(6) if u0 is None else np.asarray(u0, dtype=float)
    n_traj = int(config.n_trajectories)
    time = np.arange(n_steps // every + 1) * config.dt * every
    if n_traj == 0:
        return Ensemble(time, np.empty((0, time.size, 6)), config)
    prop = _Propagator(F, L)
    work = lambda i: _integrate_one(prop, i, n_steps, every, config.seed, u0)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            parts = list(pool.map(work, range(n_traj)))
    else:
        parts = [work(i) for i in range(n_traj)]
    return Ensemble(time, np.stack(parts), config)


def sample_covariance(ensemble: Ensemble, burn_in: float | None = None, min_samples: int = 10_000,
                      return_stderr: bool = False):
    """Time- and ensemble-averaged second moments ``<u_i u_j>`` after ``burn_in``.

    With ``return_stderr`` the standard error of each element is estimated
    from the spread of the per-trajectory time averages.
    """
    burn_in = ensemble.config.burn_in if burn_in is None else burn_in
    keep = ensemble.time >= burn_in
    X = ensemble.states[:, keep, :]
    n_traj, n_t, n = X.shape
    if n_traj * n_t < min_samples:
        raise ValidationError(f"insufficient samples after burn-in: {n_traj * n_t} < {min_samples}")
    per_traj = np.einsum("tki,tkj->tij", X, X) / n_t
    C = per_traj.mean(axis=0)
    C = 0.5 * (C + C.T)
    if not return_stderr:
        return C
    if n_traj < 2:
        raise ValidationError("standard errors need at least two trajectories")
    se = per_traj.std(axis=0, ddof=1) / math.sqrt(n_traj)
    return C, 0.5 * (se + se.T)


def bright_coordinate(ensemble: Ensemble, params: SystemParams) -> np.ndarray:
    """``(g_x x + g_y y) / g_b`` for every trajectory, shape (n_traj, n_samples)."""
    from .model import bright_mode_params

    _, g_b = bright_mode_params(params)
    return (params.g_x * ensemble.states[:, :, 2] + params.g_y * ensemble.states[:, :, 4]) / g_b


def welch_psd(signal, dt: float, segment_length: int, overlap: float = 0.5, onesided: bool = True):
    """Hann-windowed averaged periodogram ``(freq_hz, psd)`` of a real signal.

    The density is normalized per Hz: summing ``psd * df`` over the returned
    bins gives the variance. Two-sided output is ordered by frequency. A 2-D
    input is treated as independent records along the first axis and averaged.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim not in (1, 2):
        raise ValidationError("signal must be 1-D or a 2-D stack of records")
    segment_length = int(segment_length)
    if segment_length < 2 or segment_length > x.shape[-1]:
        raise ValidationError("segment_length must lie in [2, signal length]")
    if not 0 <= overlap < 1:
        raise ValidationError("overlap must lie in [0, 1)")
    if not dt > 0:
        raise ValidationError("dt must be > 0")
    f, p = welch(x, fs=1.0 / dt, window="hann", nperseg=segment_length,
                 noverlap=int(overlap * segment_length), detrend=False, scaling="density",
                 return_onesided=onesided, axis=-1)
    if x.ndim == 2:
        p = p.mean(axis=0)
    if not onesided:
        f, p = np.fft.fftshift(f), np.fft.fftshift(p)
    return f, p


def stationary_check(params: SystemParams, config: SimConfig) -> None:
    """Raise if the configuration cannot produce a stationary ensemble."""
    try:
        validate_config(params, config)
    except InstabilityError as exc:
        raise NumericalError(str(exc)) from exc
