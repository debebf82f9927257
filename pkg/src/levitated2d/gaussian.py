"""Characterization of the two-mode mechanical Gaussian state.

Input is the 4x4 covariance ``Vm`` of ``(x, p_x, y, p_y)`` normalized so that
the vacuum is the identity. Entropies and discords use the natural
logarithm, so discord values are in nats.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .errors import (DegenerateError, DiscordConditionError, FlatLandscapeWarning, PhysicalityError,
                     UnphysicalStateWarning, ValidationError)
from .model import SystemParams, overlap_parameter

PHYS_TOL = 1e-9


def _as_cov4(Vm) -> np.ndarray:
    Vm = np.asarray(Vm, dtype=float)
    if Vm.shape != (4, 4):
        raise ValidationError("expected a 4x4 mechanical covariance matrix")
    return Vm


def _require_pd(Vm):
    try:
        np.linalg.cholesky(Vm)
    except np.linalg.LinAlgError:
        raise PhysicalityError("covariance matrix is not positive definite") from None


def occupancy(Vm, mode: str) -> float:
    """Thermal occupancy of one oscillator taken alone, from (2n+1)^2 = <q^2><p^2>."""
    Vm = _as_cov4(Vm)
    try:
        i = {"x": 0, "y": 2}[mode]
    except KeyError:
        raise ValidationError(f"mode must be 'x' or 'y', got {mode!r}") from None
    n = 0.5 * (math.sqrt(Vm[i, i] * Vm[i + 1, i + 1]) - 1.0)
    if n < -PHYS_TOL:
        warnings.warn(f"negative occupancy n_{mode} = {n:.3g}", UnphysicalStateWarning, stacklevel=2)
    return n


def purity(Vm) -> tuple[float, float]:
    """``(mu, mu_independent)``: 1/sqrt(det Vm) and the value for uncorrelated modes."""
    Vm = _as_cov4(Vm)
    _require_pd(Vm)
    mu = 1.0 / math.sqrt(np.linalg.det(Vm))
    nx, ny = occupancy(Vm, "x"), occupancy(Vm, "y")
    return mu, 1.0 / ((2 * nx + 1) * (2 * ny + 1))


@dataclass(frozen=True)
class SymplecticData:
    I1: float
    I2: float
    I3: float
    I4: float
    d_plus: float
    d_minus: float
    physical: bool


def symplectic_data(Vm) -> SymplecticData:
    """Block determinants I1..I4 and the symplectic eigenvalues d+ >= d-."""
    Vm = _as_cov4(Vm)
    I1 = float(np.linalg.det(Vm[:2, :2]))
    I2 = float(np.linalg.det(Vm[2:, 2:]))
    I3 = float(np.linalg.det(Vm[:2, 2:]))
    I4 = float(np.linalg.det(Vm))
    delta = I1 + I2 + 2.0 * I3
    disc = delta**2 - 4.0 * I4
    if disc < -1e-12 * max(1.0, delta**2):
        raise PhysicalityError(f"complex symplectic eigenvalues (D^2 - 4 I4 = {disc:.3g})")
    root = math.sqrt(max(disc, 0.0))
    d_plus = math.sqrt(0.5 * (delta + root))
    d_minus = math.sqrt(max(0.5 * (delta - root), 0.0))
    physical = I1 >= 1 - PHYS_TOL and I2 >= 1 - PHYS_TOL and d_minus >= 1 - PHYS_TOL
    return SymplecticData(I1, I2, I3, I4, d_plus, d_minus, physical)


def entropy_function(x: float) -> float:
    """f(x) = (x+1)/2 log((x+1)/2) - (x-1)/2 log((x-1)/2), with f(1) = 0."""
    if x < 1.0 - PHYS_TOL:
        raise PhysicalityError(f"entropy function argument {x:.12g} < 1")
    if x <= 1.0:
        return 0.0
    a, b = 0.5 * (x + 1.0), 0.5 * (x - 1.0)
    return a * math.log(a) - b * math.log(b)


def discord_condition(I1, I2, I3, I4) -> bool:
    """Validity of the closed-form discord: (I4 - I1 I2)^2 <= (1 + I2) I3^2 (I1 + I4)."""
    lhs = (I4 - I1 * I2) ** 2
    rhs = (1.0 + I2) * I3**2 * (I1 + I4)
    return lhs <= rhs + 1e-12 * (I1 * I2) ** 2


def discord(Vm, direction: str = "X_from_Y") -> float:
    """Gaussian quantum discord between the two modes.

    ``X_from_Y`` is the discord on X when Y is measured; ``Y_from_X`` swaps
    the roles of I1 and I2.
    """
    s = symplectic_data(Vm)
    if not s.physical:
        raise PhysicalityError("covariance matrix does not describe a physical state")
    if direction == "X_from_Y":
        I1, I2 = s.I1, s.I2
    elif direction == "Y_from_X":
        I1, I2 = s.I2, s.I1
    else:
        raise ValidationError(f"unknown discord direction {direction!r}")
    I3, I4 = s.I3, s.I4
    if I2 <= 1.0:
        raise DegenerateError("discord undefined when the measured mode is pure (I2 <= 1)")
    if not discord_condition(I1, I2, I3, I4):
        raise DiscordConditionError(
            "closed-form discord not applicable: (I4 - I1 I2)^2 > (1 + I2) I3^2 (I1 + I4); "
            "the general-case formula is required")
    E = (abs(I3) + math.sqrt(max(I3**2 + (I2 - 1.0) * (I4 - I1), 0.0))) / (I2 - 1.0)
    f = entropy_function
    return f(math.sqrt(I2)) - f(s.d_plus) - f(s.d_minus) + f(E)


def ground_state_probability(Vm) -> float:
    """Probability of the two-dimensional ground state, 4 / sqrt(det(Vm + I))."""
    Vm = _as_cov4(Vm)
    _require_pd(Vm)
    return 4.0 / math.sqrt(np.linalg.det(Vm + np.eye(4)))


def _rotation(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    # acts on (x, px, y, py): the first mode becomes the axis at angle phi
    return np.array([[c, 0.0, s, 0.0],
                     [0.0, c, 0.0, s],
                     [-s, 0.0, c, 0.0],
                     [0.0, -s, 0.0, c]])


def rotate_frame(Vm, omega_x: float, omega_y: float, phi: float) -> np.ndarray:
    """``R(phi) N Vm N R(phi)^T`` with N = Diag[1/sqrt(Wx), sqrt(Wx), 1/sqrt(Wy), sqrt(Wy)].

    N removes the per-mode zero-point normalization; R(phi) rotates the
    position pair and the momentum pair together about the tweezer axis.
    """
    Vm = _as_cov4(Vm)
    if omega_x <= 0 or omega_y <= 0:
        raise ValidationError("mechanical frequencies must be > 0")
    N = np.diag([1 / math.sqrt(omega_x), math.sqrt(omega_x), 1 / math.sqrt(omega_y), math.sqrt(omega_y)])
    R = _rotation(phi)
    return R @ N @ Vm @ N @ R.T


def rotated_discord(Vm, omega_x: float, omega_y: float, phi: float) -> float:
    """Discord of the axis at ``phi + pi/2`` when the axis at ``phi`` is measured."""
    return discord(rotate_frame(Vm, omega_x, omega_y, phi), "Y_from_X")


def _golden_max(fun, a, b, tol):
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


def max_discord_over_angle(Vm, omega_x: float, omega_y: float, grid_step_deg: float = 0.5,
                           tol_deg: float = 0.01) -> tuple[float, float]:
    """Maximize :func:`rotated_discord` over phi in [-pi/2, pi/2).

    A 0.5 degree grid locates the best bracket, then golden-section search
    refines it to ``tol_deg``. Returns ``(phi_star_rad, value)``.
    """
    grid = np.deg2rad(np.arange(-90.0, 90.0, grid_step_deg))
    vals = np.array([rotated_discord(Vm, omega_x, omega_y, p) for p in grid])
    if np.ptp(vals) < 1e-6:
        warnings.warn("discord is flat across frame angles", FlatLandscapeWarning, stacklevel=2)
    i = int(np.argmax(vals))
    step = math.radians(grid_step_deg)
    phi, val = _golden_max(lambda p: rotated_discord(Vm, omega_x, omega_y, p),
                           grid[i] - step, grid[i] + step, math.radians(tol_deg))
    if val < vals[i]:
        phi, val = float(grid[i]), float(vals[i])
    # fold back into [-pi/2, pi/2); the landscape has period pi
    phi = (phi + math.pi / 2) % math.pi - math.pi / 2
    return float(phi), float(val)


@dataclass
class StateMetrics:
    n_x: float
    n_y: float
    purity: float
    purity_independent: float
    invariants_I: tuple
    symplectic_d: tuple
    discord_x_from_y: float | None
    discord_y_from_x: float | None
    p00: float
    overlap_s: float | None

    @property
    def purity_difference(self) -> float:
        return self.purity - self.purity_independent

    @property
    def discord_symmetrized(self) -> float | None:
        if self.discord_x_from_y is None or self.discord_y_from_x is None:
            return None
        return 0.5 * (self.discord_x_from_y + self.discord_y_from_x)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["invariants_I"] = list(self.invariants_I)
        d["symplectic_d"] = list(self.symplectic_d)
        d["purity_difference"] = self.purity_difference
        d["discord_symmetrized"] = self.discord_symmetrized
        return d


# scalar fields that take part in error propagation
SCALAR_METRICS = ("n_x", "n_y", "purity", "purity_independent", "purity_difference",
                  "discord_x_from_y", "discord_y_from_x", "p00", "overlap_s")


def _safe_discord(Vm, direction):
    try:
        return discord(Vm, direction)
    except (DiscordConditionError, DegenerateError):
        return None


def state_metrics(Vm, params: SystemParams | None = None) -> StateMetrics:
    """All characterization quantities of ``Vm``; ``params`` supplies the overlap s.

    A discord that the closed form cannot evaluate is reported as ``None``.
    """
    Vm = _as_cov4(Vm)
    mu, mu_ind = purity(Vm)
    s = symplectic_data(Vm)
    overlap = None
    if params is not None and params.omega_x != params.omega_y:
        overlap = overlap_parameter(params)
    return StateMetrics(
        n_x=occupancy(Vm, "x"), n_y=occupancy(Vm, "y"), purity=mu, purity_independent=mu_ind,
        invariants_I=(s.I1, s.I2, s.I3, s.I4), symplectic_d=(s.d_plus, s.d_minus),
        discord_x_from_y=_safe_discord(Vm, "X_from_Y"), discord_y_from_x=_safe_discord(Vm, "Y_from_X"),
        p00=ground_state_probability(Vm), overlap_s=overlap)


def metric_errors(group: list[StateMetrics], eta_low: StateMetrics | None = None,
                  eta_high: StateMetrics | None = None) -> dict:
    """Value, statistical and systematic error of each scalar metric.

    The value is the mean over the acquisition group and the statistical error
    its sample standard deviation (None for a single acquisition). The
    systematic error is half the spread between the states obtained with the
    detection efficiency shifted down and up, when both are given.
    """
    out = {}
    for name in SCALAR_METRICS:
        vals = [getattr(m, name) for m in group]
        if any(v is None for v in vals):
            out[name] = {"value": None, "stat": None, "syst": None}
            continue
        vals = np.asarray(vals, dtype=float)
        stat = float(np.std(vals, ddof=1)) if vals.size > 1 else None
        syst = None
        if eta_low is not None and eta_high is not None:
            lo, hi = getattr(eta_low, name), getattr(eta_high, name)
            if lo is not None and hi is not None:
                syst = 0.5 * abs(hi - lo)
        out[name] = {"value": float(vals.mean()), "stat": stat, "syst": syst}
    return out
