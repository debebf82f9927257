"""Physical parameters and response functions of the two-mode coherent-scattering system.

All rates are stored internally as angular frequencies (rad/s). Records read
from or written to disk quote ordinary frequencies in Hz, except the gas
damping rates which are plain 1/s values and are never rescaled.
Red detuning is a negative ``detuning``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .errors import DegenerateError, PoleError, ValidationError

TWO_PI = 2.0 * math.pi

DEFAULT_GAS_DAMPING = 1e-4  # 1/s

# field name -> key used in Hz-quoted records
HZ_KEYS = {
    "omega_x": "omega_x_hz",
    "omega_y": "omega_y_hz",
    "g_x": "g_x_hz",
    "g_y": "g_y_hz",
    "gamma_x": "gamma_gas_x",
    "gamma_y": "gamma_gas_y",
    "Gamma_x": "Gamma_x_hz",
    "Gamma_y": "Gamma_y_hz",
    "kappa": "kappa_hz",
    "detuning": "detuning_hz",
    "eta": "eta",
    "omega_lo": "lo_hz",
}
# fields that are not multiplied by 2*pi on conversion
_PLAIN_FIELDS = frozenset({"gamma_x", "gamma_y", "eta"})
_RECORD_DEFAULTS = {"gamma_gas_x": DEFAULT_GAS_DAMPING, "gamma_gas_y": DEFAULT_GAS_DAMPING,
                    "eta": 1.0, "lo_hz": 0.0}


@dataclass(frozen=True)
class SystemParams:
    """One configuration of the levitated particle + cavity system (rad/s units)."""

    omega_x: float
    omega_y: float
    g_x: float
    g_y: float
    Gamma_x: float
    Gamma_y: float
    kappa: float
    detuning: float
    eta: float = 1.0
    gamma_x: float = DEFAULT_GAS_DAMPING
    gamma_y: float = DEFAULT_GAS_DAMPING
    omega_lo: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v):
                raise ValidationError(f"{f.name} must be a finite real number, got {v!r}", key=f.name)
            object.__setattr__(self, f.name, float(v))
        for name in ("omega_x", "omega_y", "kappa"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be > 0", key=name)
        for name in ("g_x", "g_y", "Gamma_x", "Gamma_y", "gamma_x", "gamma_y"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0", key=name)
        if not 0 < self.eta <= 1:
            raise ValidationError("eta must lie in (0, 1]", key="eta")

    @classmethod
    def from_hz(cls, record: dict) -> "SystemParams":
        """Build from a Hz-quoted record (keys as in ``HZ_KEYS``).

        Unknown keys raise, so a typo cannot silently fall back to a default.
        """
        known = set(HZ_KEYS.values())
        unknown = sorted(set(record) - known)
        if unknown:
            raise ValidationError(f"unknown parameter key: {unknown[0]}", key=unknown[0])
        merged = {**_RECORD_DEFAULTS, **record}
        kwargs = {}
        for name, key in HZ_KEYS.items():
            if key not in merged:
                raise ValidationError(f"missing parameter key: {key}", key=key)
            value = merged[key]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f"parameter {key} must be a number, got {value!r}", key=key)
            kwargs[name] = value if name in _PLAIN_FIELDS else TWO_PI * value
        return cls(**kwargs)

    def to_hz(self) -> dict:
        return {key: (getattr(self, name) if name in _PLAIN_FIELDS else getattr(self, name) / TWO_PI)
                for name, key in HZ_KEYS.items()}

    def replace(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def swapped(self) -> "SystemParams":
        """Exchange the roles of the X and Y oscillators."""
        return replace(self, omega_x=self.omega_y, omega_y=self.omega_x, g_x=self.g_y, g_y=self.g_x,
                       Gamma_x=self.Gamma_y, Gamma_y=self.Gamma_x,
                       gamma_x=self.gamma_y, gamma_y=self.gamma_x)

    def as_dict(self) -> dict:
        return asdict(self)


def chi_mech(omega, Omega_j: float, gamma_j: float):
    """Mechanical susceptibility Omega / (Omega^2 - omega^2 - i gamma omega)."""
    if Omega_j <= 0:
        raise ValidationError("mechanical frequency must be > 0")
    if gamma_j < 0:
        raise ValidationError("gas damping must be >= 0")
    omega = np.asarray(omega, dtype=float)
    if gamma_j == 0 and np.any(np.abs(omega) == Omega_j):
        raise PoleError("undamped mechanical susceptibility evaluated on resonance")
    out = Omega_j / (Omega_j**2 - omega**2 - 1j * gamma_j * omega)
    return out


def chi_cav(omega, params: SystemParams):
    """Cavity susceptibility [-i(detuning + omega) + kappa/2]^-1."""
    omega = np.asarray(omega, dtype=float)
    out = 1.0 / (-1j * (params.detuning + omega) + 0.5 * params.kappa)
    return out


def chi_cav_minus(omega, params: SystemParams):
    """chi_c(omega) - conj(chi_c(-omega))."""
    omega = np.asarray(omega, dtype=float)
    return chi_cav(omega, params) - np.conj(chi_cav(-omega, params))


def bright_mode_params(params: SystemParams) -> tuple[float, float]:
    """Frequency and coupling of the motion along the cavity axis, ``(Omega_b, g_b)``."""
    wx = params.g_x**2
    wy = params.g_y**2
    if wx + wy == 0:
        raise DegenerateError("bright mode undefined when g_x = g_y = 0")
    first = wx * params.omega_x + wy * params.omega_y
    third = wx * params.omega_x**3 + wy * params.omega_y**3
    omega_b = math.sqrt(third / first)
    return omega_b, math.sqrt(first / omega_b)


def polarization_angle(params: SystemParams) -> float:
    """Angle between the Y axis and the cavity axis, atan(g_x / g_y)."""
    if params.g_y <= 0:
        raise DegenerateError("polarization angle undefined for g_y = 0")
    return math.atan(params.g_x / params.g_y)


def overlap_parameter(params: SystemParams) -> float:
    """Spectral overlap s = 2 (g_x^2 + g_y^2) / (kappa * (Omega_x - Omega_y))."""
    split = params.omega_x - params.omega_y
    if split == 0:
        raise DegenerateError("overlap parameter undefined for degenerate frequencies")
    return 2.0 * (params.g_x**2 + params.g_y**2) / (params.kappa * split)
