"""Heterodyne spectrum of the cavity output and its noise decomposition.

Frequencies ``omega`` are signal offsets from the local oscillator in rad/s.
With red detuning the cavity resonance sits at ``omega = -detuning > 0``: the
positive-frequency sideband is the cavity-enhanced anti-Stokes line, dominated
by classical noise, while vacuum (quantum) noise enters almost only the weaker
Stokes line at negative ``omega``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericalError, ValidationError
from .model import TWO_PI, SystemParams, bright_mode_params, chi_cav, chi_cav_minus, chi_mech
from .steady_state import build_drift

CSV_COLUMNS = ("freq_hz", "total", "term_gx", "term_gy", "term_quantum")


def _mech_response(omega, params):
    chi_x = chi_mech(omega, params.omega_x, params.gamma_x)
    chi_y = chi_mech(omega, params.omega_y, params.gamma_y)
    return chi_x, chi_y, params.g_x**2 * chi_x + params.g_y**2 * chi_y


def weighted_bright_psd(omega, params: SystemParams):
    """``g_b^2 S_xbxb(omega)`` and its (Gamma_x, Gamma_y, quantum) parts.

    The ``g_b^2`` prefactor is absorbed so the result stays defined when both
    couplings vanish.
    """
    omega = np.asarray(omega, dtype=float)
    chi_x, chi_y, G = _mech_response(omega, params)
    denom = np.abs(1.0 - 2j * chi_cav_minus(omega, params) * G) ** 2
    term_x = 4.0 * params.g_x**2 * params.Gamma_x * np.abs(chi_x) ** 2 / denom
    term_y = 4.0 * params.g_y**2 * params.Gamma_y * np.abs(chi_y) ** 2 / denom
    term_q = 4.0 * np.abs(G) ** 2 * params.kappa * np.abs(chi_cav(-omega, params)) ** 2 / denom
    return term_x + term_y + term_q, (term_x, term_y, term_q)


def bright_displacement_psd(omega, params: SystemParams):
    """``S_xbxb(omega)`` proper (requires a nonzero coupling)."""
    _, g_b = bright_mode_params(params)
    return weighted_bright_psd(omega, params)[0] / g_b**2


def symmetrized_bright_psd(omega, params: SystemParams):
    """Bright-mode displacement PSD when the optical input is classical white noise.

    Both input quadratures carry unit two-sided spectral density, i.e. the
    vacuum is replaced by its symmetrized correlator. The result is even in
    ``omega`` and normalized so that ``<x_b^2> = int S domega / 2pi``.
    """
    omega = np.asarray(omega, dtype=float)
    chi_x, chi_y, G = _mech_response(omega, params)
    denom = np.abs(1.0 - 2j * chi_cav_minus(omega, params) * G) ** 2
    cav = 0.5 * (np.abs(chi_cav(omega, params)) ** 2 + np.abs(chi_cav(-omega, params)) ** 2)
    num = 4.0 * (params.g_x**2 * params.Gamma_x * np.abs(chi_x) ** 2
                 + params.g_y**2 * params.Gamma_y * np.abs(chi_y) ** 2
                 + np.abs(G) ** 2 * params.kappa * cav)
    _, g_b = bright_mode_params(params)
    return num / denom / g_b**2


def _cavity_filter(omega, params):
    return params.eta * params.kappa * np.abs(chi_cav(omega, params)) ** 2


def heterodyne_psd(omega, params: SystemParams, shot_subtracted: bool = False,
                   mirrored: bool = False):
    """Shot-noise-normalized heterodyne PSD at ``Omega_LO + omega``.

    ``mirrored=True`` evaluates the bright-mode spectrum at ``-omega``, i.e.
    the line shape a classical-noise-dominated oscillator would produce.
    """
    omega = np.asarray(omega, dtype=float)
    total, _ = weighted_bright_psd(-omega if mirrored else omega, params)
    out = _cavity_filter(omega, params) * total
    return out if shot_subtracted else 1.0 + out


def transfer_matrix_psd(omega, params: SystemParams, shot_subtracted: bool = False):
    """Heterodyne PSD built directly from the linear Langevin system.

    Each frequency is solved with the 6x6 response ``(-i omega - A)^-1``; the
    output field ``sqrt(kappa) a - a_in`` is decomposed on the independent noise
    inputs ``(a_in, a_in^dagger, xi_x, xi_y)`` with normally ordered vacuum
    correlations, so only the creation-operator and mechanical inputs survive.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    A = build_drift(params)
    sk = np.sqrt(params.kappa)
    B = np.zeros((6, 4), dtype=complex)
    # Q_in = a + a^dag, P_in = i(a^dag - a)
    B[0, 0], B[1, 0] = sk, -1j * sk
    B[0, 1], B[1, 1] = sk, 1j * sk
    B[3, 2] = 2.0 * np.sqrt(params.Gamma_x)
    B[5, 3] = 2.0 * np.sqrt(params.Gamma_y)
    out_row = np.zeros(6, dtype=complex)
    out_row[0], out_row[1] = 0.5 * sk, 0.5j * sk  # sqrt(kappa) (Q + iP)/2
    resp = -1j * omega[:, None, None] * np.eye(6) - A
    try:
        M = np.linalg.solve(resp, np.broadcast_to(B, (omega.size, 6, 4)))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular frequency response; drift matrix has an imaginary eigenvalue") from exc
    coeff = np.einsum("j,njk->nk", out_row, M)
    coeff[:, 0] -= 1.0
    signal = params.eta * np.sum(np.abs(coeff[:, 1:]) ** 2, axis=1)
    return signal if shot_subtracted else 1.0 + signal


@dataclass
class SpectrumDecomposition:
    """Heterodyne PSD on a grid, split into Gamma_x, Gamma_y and quantum parts."""

    freq_grid: np.ndarray  # rad/s
    term_gamma_x: np.ndarray
    term_gamma_y: np.ndarray
    term_quantum: np.ndarray
    total: np.ndarray
    shot_subtracted: bool
    freq_hz: np.ndarray | None = None

    def __post_init__(self):
        if self.freq_hz is None:
            self.freq_hz = self.freq_grid / TWO_PI

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in zip(self.freq_hz, self.total, self.term_gamma_x, self.term_gamma_y,
                           self.term_quantum):
                w.writerow([repr(float(v)) for v in row])


def decompose(omega, params: SystemParams, shot_subtracted: bool = False,
              freq_hz=None) -> SpectrumDecomposition:
    omega = np.asarray(omega, dtype=float)
    _, (tx, ty, tq) = weighted_bright_psd(omega, params)
    filt = _cavity_filter(omega, params)
    tx, ty, tq = filt * tx, filt * ty, filt * tq
    total = tx + ty + tq
    if not shot_subtracted:
        total = 1.0 + total
    return SpectrumDecomposition(omega, tx, ty, tq, total, shot_subtracted, freq_hz)


def spectrum_grid(params: SystemParams, f_min: float, f_max: float, n_points: int,
                  shot_subtracted: bool = False) -> SpectrumDecomposition:
    """Evaluate the decomposed spectrum on ``n_points`` uniform frequencies in Hz."""
    if not (np.isfinite(f_min) and np.isfinite(f_max)) or f_min >= f_max:
        raise ValidationError("grid requires finite f_min < f_max")
    if int(n_points) != n_points or n_points < 2:
        raise ValidationError("grid requires n_points >= 2")
    f = np.linspace(f_min, f_max, int(n_points))
    return decompose(TWO_PI * f, params, shot_subtracted, freq_hz=f)


def sideband_peaks(params: SystemParams, f_max: float = 400e3, n_points: int = 8001) -> dict:
    """Locate the two motional sidebands and label them.

    The sideband whose weighted bright-mode spectrum is dominated by the quantum
    term is reported as Stokes, the other as anti-Stokes.
    """
    f = np.linspace(-f_max, f_max, n_points)
    dec = decompose(TWO_PI * f, params, shot_subtracted=True, freq_hz=f)
    out = {}
    for side, mask in (("negative", f < 0), ("positive", f > 0)):
        i = np.flatnonzero(mask)[np.argmax(dec.total[mask])]
        classical = dec.term_gamma_x[i] + dec.term_gamma_y[i]
        out[side] = {"freq_hz": float(f[i]), "peak": float(dec.total[i]),
                     "quantum_fraction": float(dec.term_quantum[i] / dec.total[i]) if dec.total[i] > 0 else 0.0,
                     "quantum_dominated": bool(dec.term_quantum[i] > classical)}
    neg_q, pos_q = out["negative"]["quantum_fraction"], out["positive"]["quantum_fraction"]
    stokes = "negative" if neg_q >= pos_q else "positive"
    anti = "positive" if stokes == "negative" else "negative"
    return {"stokes": out[stokes] | {"side": stokes}, "anti_stokes": out[anti] | {"side": anti}}
