"""Command-line interface: ``levitated2d {state,spectrum,fit,simulate,sweep} ...``.

Exit codes: 0 success, 1 invalid input or usage, 2 numerical failure. Errors
are reported on stderr as one JSON line followed by a human-readable message.
Every output file gets a ``<output>.manifest.json`` companion recording the
command, the fully resolved configuration and the SHA-256 of every input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DiscordConditionError, ModelError, NumericalError, ValidationError
from .fitting import FitConfig, fit, load_psd, systematic_eta
from .gaussian import max_discord_over_angle, metric_errors, state_metrics
from .model import HZ_KEYS, TWO_PI, SystemParams
from .simulate import SimConfig, bright_coordinate, integrate, sample_covariance, welch_psd
from .spectrum import spectrum_grid, symmetrized_bright_psd
from .steady_state import BASIS, covariance_json, mechanical_block, steady_state
from .sweep import fig3_grid, gamma_axis

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _diagnose("UsageError", message, EXIT_INPUT)
        sys.exit(EXIT_INPUT)


def _diagnose(kind: str, message: str, code: int, key: str | None = None) -> None:
    line = {"status": "error", "exit_code": code, "error": kind, "message": message}
    if key is not None:
        line["key"] = key
    print(json.dumps(line, sort_keys=True), file=sys.stderr)
    print(f"{Path(sys.argv[0]).name}: {kind}: {message}", file=sys.stderr)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    return obj


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out_path, command: str, config: dict, inputs) -> None:
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "output": str(out_path),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    _write_json(f"{out_path}.manifest.json", manifest)


def _load_params(path) -> SystemParams:
    try:
        return SystemParams.from_hz(_read_json(path))
    except ValidationError as exc:
        key = getattr(exc, "key", None)
        raise ValidationError(f"{path}: {exc}", key=HZ_KEYS.get(key, key)) from None


def _human(value) -> str:
    return "n/a" if value is None else f"{value:.6g}"


def cmd_state(args) -> int:
    paths = args.params
    acquisitions, metrics = [], []
    for path in paths:
        params = _load_params(path)
        V = steady_state(params)
        Vm = mechanical_block(V)
        m = state_metrics(Vm, params)
        try:
            phi, dmax = max_discord_over_angle(Vm, params.omega_x, params.omega_y)
            rotated = {"phi_deg": math.degrees(phi), "value": dmax}
        except DiscordConditionError:
            # the closed form does not hold at every frame angle for this state
            rotated = {"phi_deg": None, "value": None}
        metrics.append(m)
        acquisitions.append({"source": str(path), "params": params.to_hz(), "metrics": m.as_dict(),
                             "covariance": covariance_json(V),
                             "rotated_discord_max": rotated})
    eta_low = eta_high = None
    if (args.eta_low is None) != (args.eta_high is None):
        raise ValidationError("--eta-low and --eta-high must be given together")
    if args.eta_low is not None:
        lo, hi = _load_params(args.eta_low), _load_params(args.eta_high)
        eta_low = state_metrics(mechanical_block(steady_state(lo)), lo)
        eta_high = state_metrics(mechanical_block(steady_state(hi)), hi)
    summary = metric_errors(metrics, eta_low, eta_high)
    out = {"summary": summary, "acquisitions": acquisitions}
    _write_json(args.out, out)
    inputs = list(paths) + [p for p in (args.eta_low, args.eta_high) if p is not None]
    _write_manifest(args.out, "state", {"params": [str(p) for p in paths], "eta_low": args.eta_low,
                                        "eta_high": args.eta_high}, inputs)
    for name in ("n_x", "n_y", "purity", "purity_independent", "discord_x_from_y", "discord_y_from_x", "p00"):
        print(f"{name:>20s} = {_human(summary[name]['value'])}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    params = _load_params(args.params)
    dec = spectrum_grid(params, args.f_min, args.f_max, args.n_points, args.shot_subtracted)
    dec.write_csv(args.out)
    _write_manifest(args.out, "spectrum", {"params": str(args.params), "f_min": args.f_min, "f_max": args.f_max,
                                           "n_points": args.n_points, "shot_subtracted": args.shot_subtracted},
                    [args.params])
    print(f"wrote {args.n_points} frequencies to {args.out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    config = FitConfig.from_json(_read_json(args.config))
    data = [load_psd(p) for p in args.data]
    result = fit(data, config, threads=args.threads)
    if args.eta_rel > 0:
        systematic_eta(data, config, result, rel=args.eta_rel, threads=args.threads)
    out = result.to_json()
    _write_json(args.out, out)
    _write_manifest(args.out, "fit", {"config": config.to_json(), "data": [str(p) for p in args.data],
                                      "eta_rel": args.eta_rel, "threads": args.threads},
                    [args.config, *args.data])
    for k, row in result.table().items():
        print(f"{k:>8s} = {_human(row['value'])} Hz  stat {_human(row['stat'])}  syst {_human(row['syst'])}")
    print(f"status: {result.status}")
    if not result.converged:
        _diagnose("FitNotConverged", f"fit status {result.status}; results written to {args.out}",
                  EXIT_NUMERICAL)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = _load_params(args.params)
    raw = _read_json(args.sim)
    if args.seed is not None:
        raw = {**raw, "seed": args.seed}
    config = SimConfig.from_json(raw)
    ens = integrate(params, config, threads=args.threads)
    if config.n_trajectories > 1:
        C, se = sample_covariance(ens, return_stderr=True)
    else:
        C, se = sample_covariance(ens), None
    cov = {"basis": list(BASIS), "V": C, "stderr": se, "n_trajectories": config.n_trajectories,
           "burn_in": config.burn_in}
    _write_json(args.out_cov, cov)
    xb = bright_coordinate(ens, params)[:, ens.time >= config.burn_in]
    seg = min(args.segment_length, xb.shape[1])
    f, S = welch_psd(xb, ens.sample_dt, seg, args.overlap, onesided=False)
    analytic = symmetrized_bright_psd(TWO_PI * f, params)
    with open(args.out_psd, "w") as fh:
        fh.write("freq_hz,psd,analytic\n")
        for row in zip(f, S, analytic):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    resolved = {"params": params.to_hz(), "sim": config.to_json(), "segment_length": seg,
                "overlap": args.overlap, "threads": args.threads}
    for out in (args.out_cov, args.out_psd):
        _write_manifest(out, "simulate", resolved, [args.params, args.sim])
    print(f"simulated {config.n_trajectories} trajectories x {config.n_steps} steps")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.s_points < 1 or args.gamma_points < 1:
        raise ValidationError("grid sizes must be >= 1")
    s = np.linspace(args.s_min, args.s_max, args.s_points)
    g = gamma_axis(args.gamma_points, args.gamma_spacing, args.gamma_min_hz, args.gamma_max_hz)
    table = fig3_grid(s, g, threads=args.threads)
    table.write_csv(args.out)
    _write_manifest(args.out, "sweep fig3", {k: getattr(args, k) for k in (
        "s_points", "gamma_points", "s_min", "s_max", "gamma_spacing", "gamma_min_hz", "gamma_max_hz",
        "threads")}, [])
    n_bad = sum(1 for r in table.rows if r[-1])
    print(f"wrote {len(table.rows)} grid points ({n_bad} unstable) to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (stochastic commands)")
    common.add_argument("--threads", type=int, default=1, help="worker threads")

    parser = _Parser(prog="levitated2d", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("state", parents=[common], help="steady state and Gaussian metrics")
    p.add_argument("params", nargs="+", help="parameter JSON file(s), one per acquisition")
    p.add_argument("--eta-low", help="parameters refitted with the lower detection efficiency")
    p.add_argument("--eta-high", help="parameters refitted with the higher detection efficiency")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_state)

    p = sub.add_parser("spectrum", parents=[common], help="heterodyne spectrum and its decomposition")
    p.add_argument("--params", required=True)
    p.add_argument("--f-min", type=float, default=-300e3)
    p.add_argument("--f-max", type=float, default=300e3)
    p.add_argument("--n-points", type=int, default=6001)
    p.add_argument("--shot-subtracted", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("fit", parents=[common], help="fit heterodyne spectra")
    p.add_argument("--data", nargs="+", required=True, help="CSV spectra, one per acquisition")
    p.add_argument("--config", required=True)
    p.add_argument("--eta-rel", type=float, default=0.05,
                   help="relative detection-efficiency shift for the systematic error (0 disables)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", parents=[common], help="stochastic time-domain simulation")
    p.add_argument("--params", required=True)
    p.add_argument("--sim", required=True)
    p.add_argument("--segment-length", type=int, default=4096)
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--out-psd", required=True)
    p.add_argument("--out-cov", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="parameter sweeps")
    sweeps = p.add_subparsers(dest="sweep", required=True, parser_class=_Parser)
    q = sweeps.add_parser("fig3", parents=[common], help="purity/discord over overlap and heating rate")
    q.add_argument("--s-points", type=int, required=True)
    q.add_argument("--gamma-points", type=int, required=True)
    q.add_argument("--s-min", type=float, default=0.07)
    q.add_argument("--s-max", type=float, default=1.2)
    q.add_argument("--gamma-min-hz", type=float, default=100.0)
    q.add_argument("--gamma-max-hz", type=float, default=300e3)
    q.add_argument("--gamma-spacing", choices=("log", "linear"), default="log")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        _diagnose("ValidationError", "--threads must be >= 1", EXIT_INPUT)
        return EXIT_INPUT
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except ValidationError as exc:
        _diagnose(type(exc).__name__, str(exc), EXIT_INPUT, getattr(exc, "key", None))
        return EXIT_INPUT
    except (NumericalError, ModelError, ArithmeticError) as exc:
        _diagnose(type(exc).__name__, str(exc), EXIT_NUMERICAL)
        return EXIT_NUMERICAL
    except OSError as exc:
        _diagnose(type(exc).__name__, str(exc), EXIT_INPUT)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
