"""Purity and discord landscapes over parameter grids.

The default landscape follows the overlap-parameter family used for the
discord-versus-purity contour: equal couplings ``g/2pi = 12.4 kHz``, cavity
linewidth and mean mechanical frequency varying with ``s`` below 0.7 and held
at their ``s = 0.7`` values above it, and the frequency splitting fixed by
``s = 2 (g_x^2 + g_y^2) / (kappa delta)``.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import InstabilityError, ValidationError
from .gaussian import state_metrics
from .model import TWO_PI, SystemParams
from .steady_state import build_diffusion, build_drift, check_stability, mechanical_block, solve_lyapunov

FIG3_G = TWO_PI * 12.4e3
FIG3_S_REF, FIG3_S_LOW = 0.7, 0.07
FIG3_GAMMA_HZ = (100.0, 300e3)
MAX_GRID_POINTS = 1_000_000
FIG3_COLUMNS = ("s", "gamma_hz", "purity", "discord_sym", "unstable")


def fig3_law(s: float) -> tuple[float, float]:
    """Cavity linewidth and mean mechanical frequency (both rad/s) at overlap ``s``."""
    if not (s > 0 and math.isfinite(s)):
        raise ValidationError("overlap s must be finite and > 0", key="s")
    x = (min(s, FIG3_S_REF) - FIG3_S_REF) / (FIG3_S_LOW - FIG3_S_REF)
    kappa = TWO_PI * 1e3 * (57.0 + (330.0 - 57.0) * x**4)
    mean = TWO_PI * 1e3 * (116.0 + (246.0 - 116.0) * x**2)
    return kappa, mean


def fig3_params(s: float, Gamma: float) -> SystemParams:
    """System parameters of the contour family at overlap ``s`` and heating rate ``Gamma`` (rad/s)."""
    kappa, mean = fig3_law(s)
    delta = 2.0 * (2.0 * FIG3_G**2) / (kappa * s)
    return SystemParams(omega_x=mean + 0.5 * delta, omega_y=mean - 0.5 * delta, g_x=FIG3_G, g_y=FIG3_G,
                        Gamma_x=Gamma, Gamma_y=Gamma, kappa=kappa, detuning=-mean)


def _metric(m, name: str) -> float:
    if name == "discord_sym":
        v = m.discord_symmetrized
    elif name == "purity_difference":
        v = m.purity_difference
    else:
        v = getattr(m, name)
    return math.nan if v is None else float(v)


def evaluate(params: SystemParams, metrics: Sequence[str]) -> tuple[tuple[float, ...], bool]:
    """Metric values at one point and whether the point is unstable (values NaN then)."""
    A = build_drift(params)
    if not check_stability(A).stable:
        return tuple(math.nan for _ in metrics), True
    try:
        V = solve_lyapunov(A, build_diffusion(params), check=False)
    except InstabilityError:
        return tuple(math.nan for _ in metrics), True
    m = state_metrics(mechanical_block(V), params)
    return tuple(_metric(m, name) for name in metrics), False


def fig3_point(s: float, Gamma: float) -> tuple[float, float, bool]:
    """``(purity, symmetrized discord, unstable)`` at one point of the contour family."""
    (mu, d), unstable = evaluate(fig3_params(s, Gamma), ("purity", "discord_sym"))
    return mu, d, unstable


@dataclass
class SweepTable:
    columns: tuple
    rows: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([int(v) if isinstance(v, bool) else repr(float(v)) for v in row])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)


def grid_sweep(ranges: Mapping[str, Sequence[float]], metrics: Sequence[str] = ("purity", "discord_sym"),
               build: Callable[..., SystemParams] | None = None, threads: int = 1) -> SweepTable:
    """Evaluate ``metrics`` on the Cartesian product of ``ranges`` (row-major, last key fastest).

    ``build`` maps one grid point (keyword arguments named after the ranges) to
    :class:`SystemParams`; the default is the contour family, which expects
    the keys ``s`` and ``Gamma``. Unstable points are kept with NaN metrics
    and ``unstable = 1``.
    """
    build = build or fig3_params
    names = tuple(ranges)
    axes = [np.asarray(ranges[k], dtype=float).ravel() for k in names]
    if not names or any(a.size == 0 for a in axes):
        raise ValidationError("every grid axis needs at least one value")
    if any(not np.all(np.isfinite(a)) for a in axes):
        raise ValidationError("grid values must be finite")
    size = math.prod(a.size for a in axes)
    if size > MAX_GRID_POINTS:
        raise ValidationError(f"grid has {size} points; the limit is {MAX_GRID_POINTS}")
    points = list(itertools.product(*axes))

    def work(pt):
        vals, unstable = evaluate(build(**dict(zip(names, pt))), metrics)
        return (*pt, *vals, unstable)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            rows = list(pool.map(work, points))
    else:
        rows = [work(pt) for pt in points]
    return SweepTable(names + tuple(metrics) + ("unstable",), rows)


def gamma_axis(n_points: int, spacing: str = "log", lo_hz: float = FIG3_GAMMA_HZ[0],
               hi_hz: float = FIG3_GAMMA_HZ[1]) -> np.ndarray:
    """Heating-rate grid in Hz."""
    if n_points < 1:
        raise ValidationError("need at least one Gamma point")
    if spacing == "log":
        return np.geomspace(lo_hz, hi_hz, n_points)
    if spacing == "linear":
        return np.linspace(lo_hz, hi_hz, n_points)
    raise ValidationError(f"unknown spacing {spacing!r}")


def fig3_grid(s_values: Sequence[float], gamma_hz: Sequence[float], threads: int = 1) -> SweepTable:
    """Contour-family landscape with the columns ``s, gamma_hz, purity, discord_sym, unstable``."""
    table = grid_sweep({"s": s_values, "Gamma": TWO_PI * np.asarray(gamma_hz, dtype=float)},
                       ("purity", "discord_sym"), threads=threads)
    rows = [(s, G / TWO_PI, mu, d, u) for s, G, mu, d, u in table.rows]
    return SweepTable(FIG3_COLUMNS, rows)
