"""Least-squares fitting of the heterodyne model to measured sideband spectra.

Spectra are shot-noise normalized with the shot noise subtracted. Six
quantities are free (both frequencies, couplings and decoherence rates); the
cavity, detuning, efficiency, gas damping and LO offset are held fixed. Every
value in configs and results is quoted in Hz, except gas damping (1/s) and eta.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import find_peaks, peak_widths

from .errors import NumericalError, ValidationError
from .model import TWO_PI, SystemParams, chi_cav
from .spectrum import heterodyne_psd
from .steady_state import build_drift, check_stability

FREE_NAMES = ("omega_x", "omega_y", "g_x", "g_y", "Gamma_x", "Gamma_y")
FIXED_NAMES = ("kappa", "detuning", "eta", "gamma_x", "gamma_y", "omega_lo")
CONFIG_KEYS = ("fit_window_hz", "exclusion_bands_hz", "fixed", "free_initial", "bounds", "max_iter", "tol")
MIN_BINS = 50
# relative step of the central-difference Jacobian in log-parameter space
_JAC_STEP = 1e-6


@dataclass
class SpectrumData:
    """One acquisition: PSD samples vs frequency offset from the LO (Hz)."""

    freq_hz: np.ndarray
    psd: np.ndarray
    acquisition_id: str = "acq0"
    dark_subtracted: bool = True
    shot_normalized: bool = True

    def __post_init__(self):
        self.freq_hz = np.asarray(self.freq_hz, dtype=float)
        self.psd = np.asarray(self.psd, dtype=float)
        if self.freq_hz.ndim != 1 or self.freq_hz.shape != self.psd.shape:
            raise ValidationError("freq_hz and psd must be 1-D arrays of equal length")
        if not np.all(np.isfinite(self.freq_hz)) or not np.all(np.isfinite(self.psd)):
            raise ValidationError("spectrum contains non-finite values")
        if np.any(np.diff(self.freq_hz) <= 0):
            raise ValidationError("frequencies must be strictly increasing")


def load_psd(path, acquisition_id: str | None = None, dark_subtracted: bool = True,
             shot_normalized: bool = True) -> SpectrumData:
    """Read a ``freq_hz,psd`` CSV file.

    A spectrum export (``total`` plus the three term columns) is accepted too;
    if its total still contains the unit shot-noise floor, the floor is removed.
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"{path}: no such file")
    freqs, vals = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}:1: empty file") from None
        if "freq_hz" not in header:
            raise ValidationError(f"{path}:1: header must contain freq_hz")
        col = "psd" if "psd" in header else "total" if "total" in header else None
        if col is None:
            raise ValidationError(f"{path}:1: header must contain psd")
        i_f, i_p = header.index("freq_hz"), header.index(col)
        terms = [header.index(t) for t in ("term_gx", "term_gy", "term_quantum") if t in header]
        if col != "total" or len(terms) != 3:
            terms = []
        floors = []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            try:
                f, v = float(row[i_f]), float(row[i_p])
            except (ValueError, IndexError):
                raise ValidationError(f"{path}:{lineno}: cannot parse row {row!r}") from None
            if not (math.isfinite(f) and math.isfinite(v)):
                raise ValidationError(f"{path}:{lineno}: NaN or infinite value")
            if freqs and f <= freqs[-1]:
                raise ValidationError(f"{path}:{lineno}: frequencies not strictly increasing")
            freqs.append(f)
            vals.append(v)
            if terms:
                try:
                    floors.append(v - sum(float(row[i]) for i in terms))
                except (ValueError, IndexError):
                    raise ValidationError(f"{path}:{lineno}: cannot parse row {row!r}") from None
    if floors and np.allclose(floors, 1.0, rtol=0, atol=1e-9):
        vals = [v - 1.0 for v in vals]
    return SpectrumData(np.array(freqs), np.array(vals), acquisition_id or path.stem,
                        dark_subtracted, shot_normalized)


@dataclass
class FitConfig:
    fit_window_hz: tuple[float, float]
    fixed: dict
    exclusion_bands_hz: list = field(default_factory=list)
    free_initial: dict | None = None
    bounds: dict | None = None
    max_iter: int = 500
    tol: float = 1e-6
    # report the higher-frequency oscillator as X
    canonical_order: bool = True

    def __post_init__(self):
        lo, hi = (float(v) for v in self.fit_window_hz)
        if not lo < hi:
            raise ValidationError("fit window must satisfy f_lo < f_hi", key="fit_window_hz")
        self.fit_window_hz = (lo, hi)
        bands = []
        for band in self.exclusion_bands_hz:
            a, b = (float(v) for v in band)
            if not a <= b:
                raise ValidationError("exclusion band must satisfy f_lo <= f_hi", key="exclusion_bands_hz")
            bands.append((a, b))
        self.exclusion_bands_hz = bands
        missing = [k for k in FIXED_NAMES if k not in self.fixed]
        if missing:
            raise ValidationError(f"fixed parameter missing: {missing[0]}", key="fixed")
        extra = sorted(set(self.fixed) - set(FIXED_NAMES))
        if extra:
            raise ValidationError(f"unknown fixed parameter: {extra[0]}", key="fixed")
        if self.free_initial is not None:
            bad = sorted(set(self.free_initial) ^ set(FREE_NAMES))
            if bad:
                raise ValidationError(f"free_initial must list exactly {FREE_NAMES}; offending: {bad[0]}",
                                      key="free_initial")
            if any(not (math.isfinite(v) and v > 0) for v in self.free_initial.values()):
                raise ValidationError("initial guesses must be finite and > 0", key="free_initial")
        if self.bounds is not None:
            extra = sorted(set(self.bounds) - set(FREE_NAMES))
            if extra:
                raise ValidationError(f"bounds for unknown parameter {extra[0]}", key="bounds")
            for k, (a, b) in self.bounds.items():
                if not 0 < a < b:
                    raise ValidationError(f"bounds of {k} must satisfy 0 < lo < hi", key="bounds")
        if int(self.max_iter) < 1:
            raise ValidationError("max_iter must be >= 1", key="max_iter")
        if not self.tol > 0:
            raise ValidationError("tol must be > 0", key="tol")

    @classmethod
    def from_json(cls, cfg: dict) -> "FitConfig":
        unknown = sorted(set(cfg) - set(CONFIG_KEYS))
        if unknown:
            raise ValidationError(f"unknown config key: {unknown[0]}", key=unknown[0])
        for key in ("fit_window_hz", "fixed"):
            if key not in cfg:
                raise ValidationError(f"missing config key: {key}", key=key)
        kw = {k: cfg[k] for k in CONFIG_KEYS if k in cfg and cfg[k] is not None}
        if "bounds" in kw:
            kw["bounds"] = {k: tuple(v) for k, v in kw["bounds"].items()}
        return cls(**kw)

    def to_json(self) -> dict:
        return {
            "fit_window_hz": list(self.fit_window_hz),
            "exclusion_bands_hz": [list(b) for b in self.exclusion_bands_hz],
            "fixed": dict(self.fixed),
            "free_initial": None if self.free_initial is None else dict(self.free_initial),
            "bounds": None if self.bounds is None else {k: list(v) for k, v in self.bounds.items()},
            "max_iter": int(self.max_iter),
            "tol": self.tol,
        }

    def with_eta(self, eta: float) -> "FitConfig":
        return replace(self, fixed={**self.fixed, "eta": eta})


def fixed_from_params(params: SystemParams) -> dict:
    hz = params.to_hz()
    return {"kappa": hz["kappa_hz"], "detuning": hz["detuning_hz"], "eta": hz["eta"],
            "gamma_x": hz["gamma_gas_x"], "gamma_y": hz["gamma_gas_y"], "omega_lo": hz["lo_hz"]}


def free_from_params(params: SystemParams) -> dict:
    hz = params.to_hz()
    return {"omega_x": hz["omega_x_hz"], "omega_y": hz["omega_y_hz"], "g_x": hz["g_x_hz"],
            "g_y": hz["g_y_hz"], "Gamma_x": hz["Gamma_x_hz"], "Gamma_y": hz["Gamma_y_hz"]}


def make_params(free, fixed: dict) -> SystemParams:
    """SystemParams from free values (mapping or sequence in FREE_NAMES order) and fixed ones, all Hz."""
    if not isinstance(free, dict):
        free = dict(zip(FREE_NAMES, free))
    return SystemParams(
        omega_x=TWO_PI * free["omega_x"], omega_y=TWO_PI * free["omega_y"],
        g_x=TWO_PI * free["g_x"], g_y=TWO_PI * free["g_y"],
        Gamma_x=TWO_PI * free["Gamma_x"], Gamma_y=TWO_PI * free["Gamma_y"],
        kappa=TWO_PI * fixed["kappa"], detuning=TWO_PI * fixed["detuning"], eta=fixed["eta"],
        gamma_x=fixed["gamma_x"], gamma_y=fixed["gamma_y"], omega_lo=TWO_PI * fixed["omega_lo"])


def fit_mask(freq_hz, config: FitConfig) -> np.ndarray:
    """Bins inside the fit window and outside every exclusion band."""
    f = np.asarray(freq_hz)
    lo, hi = config.fit_window_hz
    mask = (f >= lo) & (f <= hi)
    for a, b in config.exclusion_bands_hz:
        mask &= ~((f >= a) & (f <= b))
    return mask


def model_psd(freq_hz, params: SystemParams):
    """Shot-subtracted model spectrum at offsets ``freq_hz`` from the LO."""
    return heterodyne_psd(TWO_PI * np.asarray(freq_hz, dtype=float), params, shot_subtracted=True)


def _check_data(data: SpectrumData):
    if not (data.dark_subtracted and data.shot_normalized):
        raise ValidationError(f"acquisition {data.acquisition_id}: spectrum must be dark-subtracted "
                              "and shot-noise normalized before fitting")


def objective(params_free, data: SpectrumData, config: FitConfig) -> float:
    """Sum of squared residuals (model - data) over the included bins."""
    mask = fit_mask(data.freq_hz, config)
    if not mask.any():
        raise ValidationError("fit window is empty after exclusions")
    r = model_psd(data.freq_hz[mask], make_params(params_free, config.fixed)) - data.psd[mask]
    return float(np.dot(r, r))


def initial_guess(data: SpectrumData, config: FitConfig) -> dict:
    """Rough starting point from the peaks of the windowed spectrum.

    The two tallest local maxima give the frequencies; the common width sets
    the couplings via the optical damping 4 g^2 / kappa; peak areas set the
    decoherence rates.
    """
    mask = fit_mask(data.freq_hz, config)
    f, y = data.freq_hz[mask], data.psd[mask]
    if f.size < 3:
        raise ValidationError("not enough bins for peak finding")
    kappa = config.fixed["kappa"]
    peaks, props = find_peaks(y, prominence=0.05 * max(np.max(y), 1e-300))
    order = peaks[np.argsort(y[peaks])[::-1]] if peaks.size else np.array([int(np.argmax(y))])
    df = float(np.median(np.diff(f)))
    fwhm = float(peak_widths(y, order[:1], rel_height=0.5)[0][0]) * df
    fwhm = max(fwhm, 2 * df)
    if order.size >= 2:
        centers = np.abs(f[order[:2]])
    else:
        c = abs(f[order[0]])
        centers = np.array([c + 0.25 * fwhm, c - 0.25 * fwhm])
        fwhm *= 0.5
    centers = np.sort(centers)[::-1]
    g = math.sqrt(fwhm * kappa / 4.0)
    area = float(np.sum(np.clip(y, 0, None)) * df)
    params = make_params({"omega_x": centers[0], "omega_y": centers[1], "g_x": g, "g_y": g,
                          "Gamma_x": 1.0, "Gamma_y": 1.0}, config.fixed)
    filt = params.eta * params.kappa * abs(chi_cav(TWO_PI * np.mean(f), params)) ** 2
    gamma_tot = TWO_PI * fwhm
    Gamma = area * gamma_tot / (filt * (TWO_PI * g) ** 2) / TWO_PI / 2.0
    Gamma = max(Gamma, 1.0)
    return {"omega_x": float(centers[0]), "omega_y": float(centers[1]), "g_x": g, "g_y": g,
            "Gamma_x": Gamma, "Gamma_y": Gamma}


@dataclass
class AcquisitionFit:
    acquisition_id: str
    values: dict
    rss: float
    status: str
    n_iter: int
    at_bounds: list


def _bounds_log(config: FitConfig, start: dict):
    lo, hi = np.empty(6), np.empty(6)
    for i, name in enumerate(FREE_NAMES):
        if config.bounds and name in config.bounds:
            a, b = config.bounds[name]
        else:
            a, b = start[name] * 1e-3, start[name] * 1e3
        lo[i], hi[i] = math.log(a), math.log(b)
    return lo, hi


def _levenberg_marquardt(residual, theta0, lo, hi, max_iter, tol, accept):
    """Damped Gauss-Newton iterations on log-parameters, steps clipped to bounds.

    ``accept(theta)`` may veto a trial point (e.g. an unstable drift matrix);
    vetoed steps count as failures and raise the damping.
    """
    theta = np.clip(np.asarray(theta0, dtype=float), lo, hi)
    r = residual(theta)
    cost = float(r @ r)
    lam = 1e-3
    n = theta.size
    status = "max_iter"
    it = 0
    while it < max_iter:
        it += 1
        J = np.empty((r.size, n))
        for j in range(n):
            step = np.zeros(n)
            step[j] = _JAC_STEP
            J[:, j] = (residual(theta + step) - residual(theta - step)) / (2 * _JAC_STEP)
        JtJ = J.T @ J
        grad = J.T @ r
        scale = np.maximum(np.diag(JtJ), 1e-300)
        while True:
            try:
                delta = np.linalg.solve(JtJ + lam * np.diag(scale), -grad)
            except np.linalg.LinAlgError:
                delta = None
            if delta is not None and np.all(np.isfinite(delta)):
                trial = np.clip(theta + delta, lo, hi)
                if accept(trial):
                    r_trial = residual(trial)
                    cost_trial = float(r_trial @ r_trial)
                    if np.isfinite(cost_trial) and cost_trial <= cost:
                        break
            lam *= 10.0
            if lam > 1e16:
                return theta, cost, it, "stalled"
        change = float(np.max(np.abs(np.expm1(trial - theta))))
        theta, r, cost = trial, r_trial, cost_trial
        lam = max(lam / 10.0, 1e-12)
        if change < tol or cost == 0.0:
            status = "converged"
            break
    return theta, cost, it, status


def _rank(run):
    theta, cost, n_iter, status = run
    return (status != "converged", cost)


def fit_single(data: SpectrumData, config: FitConfig, start: dict | None = None) -> AcquisitionFit:
    """Fit one acquisition."""
    _check_data(data)
    mask = fit_mask(data.freq_hz, config)
    if mask.sum() < MIN_BINS:
        raise ValidationError(f"fit needs at least {MIN_BINS} bins, window has {int(mask.sum())}")
    f, y = data.freq_hz[mask], data.psd[mask]
    peak_start = initial_guess(data, config)
    start = start or config.free_initial or peak_start
    lo, hi = _bounds_log(config, start)

    def residual(theta):
        p = make_params(np.exp(theta), config.fixed)
        return model_psd(f, p) - y

    def accept(theta):
        return check_stability(build_drift(make_params(np.exp(theta), config.fixed))).stable

    # the supplied start and the peak-derived one; the lower cost wins
    best = None
    for candidate in (start, peak_start) if start is not peak_start else (start,):
        theta0 = np.log([candidate[k] for k in FREE_NAMES])
        run = _levenberg_marquardt(residual, theta0, lo, hi, int(config.max_iter), config.tol, accept)
        if best is None or _rank(run) < _rank(best):
            best = run
    theta, cost, n_iter, status = best
    values = dict(zip(FREE_NAMES, (float(v) for v in np.exp(theta))))
    if config.canonical_order and values["omega_x"] < values["omega_y"]:
        values = _swap_xy(values)
    edge = 1e-9
    at_bounds = [n for i, n in enumerate(FREE_NAMES) if theta[i] <= lo[i] + edge or theta[i] >= hi[i] - edge]
    if at_bounds and status == "converged":
        status = "converged_at_bound"
    return AcquisitionFit(data.acquisition_id, values, cost, status, n_iter, at_bounds)


def _swap_xy(values: dict) -> dict:
    return {"omega_x": values["omega_y"], "omega_y": values["omega_x"], "g_x": values["g_y"],
            "g_y": values["g_x"], "Gamma_x": values["Gamma_y"], "Gamma_y": values["Gamma_x"]}


@dataclass
class FitResult:
    """Fit of an acquisition group: mean values, spread, and per-acquisition details (Hz)."""

    params: SystemParams
    values: dict
    stat: dict | None
    acquisitions: list
    syst: dict | None = None

    @property
    def status(self) -> str:
        statuses = {a.status for a in self.acquisitions}
        return "converged" if statuses == {"converged"} else ",".join(sorted(statuses))

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def rss(self) -> float:
        return float(sum(a.rss for a in self.acquisitions))

    @property
    def n_iter(self) -> list:
        return [a.n_iter for a in self.acquisitions]

    def table(self) -> dict:
        """Per-parameter ``value, stat, syst`` in the style of the published tables."""
        return {k: {"value": self.values[k],
                    "stat": None if self.stat is None else self.stat[k],
                    "syst": None if self.syst is None else self.syst[k]} for k in FREE_NAMES}

    def to_json(self) -> dict:
        return {
            "parameters_hz": self.table(),
            "params_record": self.params.to_hz(),
            "status": self.status,
            "rss": self.rss,
            "n_iter": self.n_iter,
            "acquisitions": [{"acquisition_id": a.acquisition_id, "values": a.values, "rss": a.rss,
                              "status": a.status, "n_iter": a.n_iter, "at_bounds": a.at_bounds}
                             for a in self.acquisitions],
        }


def _aggregate(fits: list, config: FitConfig) -> FitResult:
    arr = np.array([[a.values[k] for k in FREE_NAMES] for a in fits])
    mean = dict(zip(FREE_NAMES, (float(v) for v in arr.mean(axis=0))))
    stat = None
    if len(fits) > 1:
        stat = dict(zip(FREE_NAMES, (float(v) for v in arr.std(axis=0, ddof=1))))
    return FitResult(make_params(mean, config.fixed), mean, stat, list(fits))


def fit(data, config: FitConfig, threads: int = 1, starts: list | None = None) -> FitResult:
    """Fit one acquisition or a group, each acquisition separately, and aggregate.

    The reported values are means over the group and the statistical error
    is the sample standard deviation.
    """
    group = [data] if isinstance(data, SpectrumData) else list(data)
    if not group:
        raise ValidationError("no spectra to fit")
    starts = starts or [None] * len(group)
    if threads > 1 and len(group) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fits = list(pool.map(lambda ds: fit_single(ds[0], config, ds[1]), zip(group, starts)))
    else:
        fits = [fit_single(d, config, s) for d, s in zip(group, starts)]
    return _aggregate(fits, config)


@dataclass
class EtaSystematic:
    half_range: dict
    low: FitResult
    high: FitResult


def systematic_eta(data, config: FitConfig, fit_result: FitResult, rel: float = 0.05,
                   threads: int = 1) -> EtaSystematic:
    """Refit with eta scaled by (1 - rel) and (1 + rel); half the spread of each parameter."""
    if not fit_result.converged:
        raise NumericalError(f"systematic error needs a converged fit (status {fit_result.status})")
    eta = config.fixed["eta"]
    starts = [a.values for a in fit_result.acquisitions]
    results = []
    for factor in (1.0 - rel, 1.0 + rel):
        new_eta = eta * factor
        if not 0 < new_eta <= 1:
            raise ValidationError(f"shifted efficiency {new_eta} outside (0, 1]")
        results.append(fit(data, config.with_eta(new_eta), threads=threads, starts=starts))
    low, high = results
    half = {k: 0.5 * abs(high.values[k] - low.values[k]) for k in FREE_NAMES}
    fit_result.syst = half
    return EtaSystematic(half, low, high)


def predict_other_sideband(fit_result: FitResult, data, config: FitConfig) -> dict:
    """Compare the fitted model with the data in the mirror image of the fit window."""
    group = [data] if isinstance(data, SpectrumData) else list(data)
    lo, hi = config.fit_window_hz
    mirror = replace(config, fit_window_hz=(-hi, -lo),
                     exclusion_bands_hz=[(-b, -a) for a, b in config.exclusion_bands_hz])
    out = {"window_hz": [-hi, -lo], "acquisitions": []}
    for d in group:
        m = fit_mask(d.freq_hz, mirror)
        if not m.any():
            out["acquisitions"].append({"acquisition_id": d.acquisition_id, "n_bins": 0})
            continue
        model = model_psd(d.freq_hz[m], fit_result.params)
        resid = d.psd[m] - model
        out["acquisitions"].append({
            "acquisition_id": d.acquisition_id, "n_bins": int(m.sum()),
            "rms_residual": float(np.sqrt(np.mean(resid**2))),
            "model_peak": float(np.max(model)), "data_peak": float(np.max(d.psd[m]))})
    return out
