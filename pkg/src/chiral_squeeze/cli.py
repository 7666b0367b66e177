"""Command-line entry point: ``chiral-squeeze <command> --config run.yaml``.

Exit codes: 0 success, 1 a check failed (oracle mismatch, non-identifiable
fit), 2 invalid input (config, files, capacity).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, parse_config
from .estimator import fit_beta_n
from .formats import (
    TraceFormatError,
    read_traces,
    write_complex_spectrum_csv,
    write_squeezing_spectrum_csv,
    write_table_csv,
    write_time_domain_csv,
    write_traces,
)
from .oracle import CapacityError, CascadedSystem, InsufficientTauRangeError, compare_with_composition
from .physics import (
    asymptotic_spectrum,
    compose_entangled_spectrum,
    squeezing_angle_chi,
    squeezing_spectrum,
    xi_squared,
)
from .pipeline import AnalysisSettings, analyze, repetitions_from_traces
from .synth import SynthConfig, synthesize_run, uniform_theta_schedule

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INPUT = 0, 1, 2
MHZ = 1e6


class InputError(Exception):
    pass


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else parse_config("", "<defaults>", require=False)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.grid_points is not None:
        cfg.override("grid", "n_points", args.grid_points)
    if args.grid_max_gamma is not None:
        cfg.override("grid", "max_gamma", float(args.grid_max_gamma))
    return cfg


def _require_config(args):
    if not args.config:
        raise InputError(f"{args.command}: --config is required")
    return _config(args)


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out if args.out is not None else cfg.get("output", "dir"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def synth_config(cfg: RunConfig) -> SynthConfig:
    s = cfg.sections["synth"]
    return SynthConfig(
        ensemble=cfg.ensemble(),
        drive=cfg.drive(),
        eta=s["eta"],
        electronic_noise=s["electronic_noise"],
        f_het=s["f_het_mhz"] * MHZ,
        n_repetitions=s["n_repetitions"],
        duration=s["duration_us"] * 1e-6,
        sample_rate=s["sample_rate_mhz"] * MHZ,
        beat_amplitude=s["beat_amplitude"],
        grid=cfg.grid(),
    )


def analysis_settings(cfg: RunConfig, sample_rate: float) -> AnalysisSettings:
    a = cfg.sections["analysis"]
    return AnalysisSettings(
        ensemble=cfg.ensemble(),
        drive=cfg.drive(),
        eta=cfg.get("synth", "eta"),
        sample_rate=sample_rate,
        f_het=cfg.get("synth", "f_het_mhz") * MHZ,
        f_min=a["f_min_mhz"] * MHZ,
        f_max=a["f_max_mhz"] * MHZ,
        n_theta_bins=a["n_theta_bins"],
        theta_half_width=math.radians(a["theta_half_width_deg"]),
        tau_max=a["tau_max"],
        window=a["window"],
    )


def theta_schedule(cfg: RunConfig) -> np.ndarray:
    n = cfg.get("synth", "n_repetitions")
    if cfg.get("synth", "theta_schedule") == "fixed":
        return np.full(n, cfg.drive().theta)
    return uniform_theta_schedule(n, cfg.seed)


def cmd_spectrum(args) -> tuple[int, dict, Path]:
    cfg = _require_config(args)
    out = _out_dir(args, cfg)
    ens, drive, grid = cfg.ensemble(natural_units=True), cfg.drive(), cfg.grid()
    phi = compose_entangled_spectrum(ens, grid)
    spec = squeezing_spectrum(phi, drive, ens)
    write_complex_spectrum_csv(phi, out / "phi_spectrum.csv")
    write_squeezing_spectrum_csv(spec, out / "squeezing_spectrum.csv")
    report = {
        "n_atoms": ens.n_atoms,
        "beta": ens.beta,
        "delta_over_gamma": ens.detuning,
        "s": drive.s,
        "theta": drive.theta,
        "xi_squared": xi_squared(ens),
        "optical_depth": ens.optical_depth,
        "min_s": float(spec.values.min()),
        "omega_at_min": float(abs(grid.omega[int(np.argmin(spec.values))])),
    }
    if ens.detuning == 0:
        for regime in ("small_od", "large_od"):
            write_squeezing_spectrum_csv(asymptotic_spectrum(ens, drive, grid, regime), out / f"asymptotic_{regime}.csv")
    try:
        report["squeezing_angle_chi"] = squeezing_angle_chi(phi, ens)
    except ValueError:
        report["squeezing_angle_chi"] = None
    return EXIT_OK, report, out


def cmd_synthesize(args) -> tuple[int, dict, Path]:
    cfg = _require_config(args)
    out = _out_dir(args, cfg)
    sc = synth_config(cfg)
    ts = synthesize_run(sc, theta_schedule(cfg), cfg.seed)
    path = out / cfg.get("output", "traces")
    write_traces(ts, path)
    return EXIT_OK, {"traces": path.name, "n_repetitions": sc.n_repetitions, "n_samples": sc.n_samples, "seed": cfg.seed}, out


def cmd_analyze(args) -> tuple[int, dict, Path]:
    cfg = _require_config(args)
    out = _out_dir(args, cfg)
    path = Path(args.traces) if args.traces else out / cfg.get("output", "traces")
    try:
        ts = read_traces(path)
    except OSError as exc:
        raise InputError(f"cannot read traces {path}: {exc}") from exc
    settings = analysis_settings(cfg, ts.sample_rate)
    res = analyze(repetitions_from_traces(ts), settings)
    table = res.noise_table(settings.n_theta_bins)
    write_table_csv(out / "noise_vs_theta.csv", ["theta", "noise", "weight"], list(zip(*table)) if table else [[], [], []])
    report = {
        "n_repetitions": int(res.theta.size),
        "cosine_fit": res.cosine.as_dict(),
        "min_noise": res.min_noise,
        "squeezing_percent": res.squeezing_percent,
        "varphi_over_pi": res.cosine["varphi"] / math.pi,
        "notes": res.warnings,
    }
    if res.magnitude is not None:
        m = res.magnitude
        write_table_csv(out / "phi_magnitude.csv", ["freq_hz", "magnitude", "stderr", "masked"], [m.freq_hz, m.magnitude, m.stderr, m.mask.astype(int)])
        report["masked_magnitude_bins"] = int(m.mask.sum())
    if res.phase is not None:
        p = res.phase
        write_table_csv(
            out / "phi_phase.csv",
            ["freq_hz", "re", "im", "re_stderr", "im_stderr", "phase", "masked"],
            [p.freq_hz, p.phi.real, p.phi.imag, p.re_stderr, p.im_stderr, p.phase, p.mask.astype(int)],
        )
        report["masked_phase_bins"] = int(p.mask.sum())
    if res.wavefunction is not None:
        w = res.wavefunction
        write_time_domain_csv(w.time_domain, out / "phi_tau.csv", {"re_stderr": w.re_stderr, "im_stderr": w.im_stderr})
    return EXIT_OK, report, out


def cmd_oracle_compare(args) -> tuple[int, dict, Path]:
    cfg = _require_config(args)
    out = _out_dir(args, cfg)
    ens, drive, o = cfg.ensemble(natural_units=True), cfg.drive(), cfg.sections["oracle"]
    if ens.n_atoms == 0:
        raise InputError("oracle-compare needs at least one atom")
    system = CascadedSystem.from_ensemble(ens, drive)
    rep = compare_with_composition(
        system, drive.theta, o["window_gamma"], cfg.grid(), o["threshold"], o["method"], o["leading_order"]
    )
    (out / "oracle_compare.txt").write_text(rep.to_text(), encoding="utf-8")
    return (EXIT_OK if rep.passed else EXIT_CHECK_FAILED), rep.summary(), out


def read_transmission_csv(path):
    """Columns ``power_w, transmission`` and optionally ``sigma``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header[:2] != ["power_w", "transmission"]:
        raise InputError(f"{path}: expected header power_w,transmission[,sigma], got {rows[0]}")
    try:
        body = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    sigma = body[:, 2] if "sigma" in header and body.shape[1] > 2 else None
    return body[:, 0], body[:, 1], sigma


def cmd_fit_beta(args) -> tuple[int, dict, Path]:
    cfg = _config(args)
    source = args.transmission or cfg.get("fit_beta", "transmission_csv")
    if not source:
        raise InputError("fit-beta: give --transmission CSV or fit_beta.transmission_csv")
    out = _out_dir(args, cfg)
    try:
        power, trans, sigma = read_transmission_csv(source)
    except OSError as exc:
        raise InputError(f"cannot read {source}: {exc}") from exc
    res = fit_beta_n(
        power, trans, sigma=sigma, gamma_tot=cfg.gamma_tot, wavelength=cfg.get("fit_beta", "wavelength_nm") * 1e-9
    )
    report = res.as_dict()
    report["stderr"] = {n: res.stderr(n) for n in res.names}
    _write_json(out / "fit_beta.json", report)
    return (EXIT_OK if res.converged else EXIT_CHECK_FAILED), report, out


COMMANDS = {
    "spectrum": cmd_spectrum,
    "synthesize": cmd_synthesize,
    "analyze": cmd_analyze,
    "oracle-compare": cmd_oracle_compare,
    "fit-beta": cmd_fit_beta,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--seed", type=_u64, help="override the configuration seed")
    common.add_argument("--out", metavar="DIR", help="output directory (default: output.dir)")
    common.add_argument("--grid-points", type=int, metavar="N", help="frequency grid size")
    common.add_argument("--grid-max-gamma", type=float, metavar="F", help="grid half-width in units of gamma_tot")
    parser = argparse.ArgumentParser(prog="chiral-squeeze", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="entangled and squeezing spectra with asymptotics")
    sub.add_parser("synthesize", parents=[common], help="write a synthetic trace container")
    p = sub.add_parser("analyze", parents=[common], help="run the estimator on a trace container")
    p.add_argument("--traces", metavar="PATH", help="trace container (default: <out>/output.traces)")
    sub.add_parser("oracle-compare", parents=[common], help="compare against the master-equation oracle")
    p = sub.add_parser("fit-beta", parents=[common], help="fit beta and N to transmission data")
    p.add_argument("--transmission", metavar="CSV", help="columns power_w,transmission[,sigma]")
    return parser


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            code, report, out = COMMANDS[args.command](args)
        except (ConfigError, InputError, TraceFormatError, CapacityError, InsufficientTauRangeError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    messages = sorted({str(w.message) for w in caught})
    for msg in messages:
        print(f"warning: {msg}", file=sys.stderr)
    report = dict(report, command=args.command, exit_code=code, warnings=messages)
    _write_json(out / f"report_{args.command.replace('-', '_')}.json", report)
    print(json.dumps(_jsonable(report), sort_keys=True))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
