"""Command-line front end.

Exit codes: 0 success, 2 configuration or input error, 3 numerical/accuracy
error, 4 fit did not converge.
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import analysis, instrument, zernike
from .config import RunConfig
from .errors import (AccuracyError, ConfigError, DomainError, GeometryError,
                     NoPropagatingOrderError, NoSignalError)
from .model import Beam, Grating

log = logging.getLogger("holoneutron")

EXIT_CONFIG, EXIT_NUMERIC, EXIT_NONCONVERGED = 2, 3, 4


class NonConvergedError(Exception):
    pass


def grating_from(cfg: RunConfig) -> Grating:
    g = cfg.section("grating")
    return Grating(spacing=g["spacing"], thickness=g["thickness"], index_modulation=g["index_modulation"],
                   tilt=g["tilt"], mean_index=g["mean_index"])


def beam_from(cfg: RunConfig) -> Beam:
    b = cfg.section("beam")
    return Beam(wavelength=b["wavelength"], relative_spread=b["spread"], divergence=b["divergence"],
                kernel=b["kernel"])


def _solver(cfg: RunConfig) -> dict:
    s = cfg.section("solver")
    return {"orders": s["orders"], "nodes": s["nodes"], "steps": s["steps"]}


@contextlib.contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def cmd_rock(cfg: RunConfig, args) -> int:
    r = cfg.section("rock")
    log.info("rocking scan: %d points, kernel %s", r["points"], cfg["beam.kernel"])
    curve = instrument.rocking_scan(grating_from(cfg), beam_from(cfg), r["theta_min"], r["theta_max"],
                                    r["points"], **_solver(cfg))
    if r["noise"] > 0:
        rng = np.random.default_rng(cfg["run.seed"])
        curve = instrument.RockingCurve(curve.theta, curve.eta + rng.normal(0.0, r["noise"], curve.eta.shape),
                                        r["noise"])
    with _output(args.output) as fh:
        curve.to_csv(fh)
    return 0


def cmd_fit(cfg: RunConfig, args) -> int:
    f = cfg.section("fit")
    data_path = Path(args.data)
    if not data_path.is_file():
        raise ConfigError(f"data file not found: {data_path}")
    data = instrument.RockingCurve.from_csv(data_path, default_sigma=f["sigma"])
    bounds = {
        "index_modulation": (f["index_modulation_min"], f["index_modulation_max"]),
        "thickness": (f["thickness_min"], f["thickness_max"]),
        "theta_offset": (f["theta_offset_min"], f["theta_offset_max"]),
    }
    solver = _solver(cfg)
    try:
        problem = analysis.FitProblem(data=data, grating=grating_from(cfg), beam=beam_from(cfg),
                                      free=f["free"], bounds={k: bounds[k] for k in f["free"] if k in bounds},
                                      initial={"theta_offset": f["theta_offset"]}, max_iter=f["max_iter"],
                                      **solver)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    result = analysis.fit(problem)
    log.info("chi2 by accepted iteration: %s", " ".join(f"{c:.6g}" for c in result.history))
    sys.stdout.write(result.report())
    if args.csv:
        with _output(args.csv) as fh:
            result.to_csv(fh)
    if not result.converged and not args.allow_nonconverged:
        raise NonConvergedError(f"fit did not converge after {result.iterations} iterations")
    return 0


def cmd_design(cfg: RunConfig, args) -> int:
    d = cfg.section("design")
    s = _solver(cfg)
    point = analysis.design_three_port(grating_from(cfg), beam_from(cfg), (d["tilt_min"], d["tilt_max"]),
                                       scan_points=d["points"], tolerance=d["tolerance"], **s)
    with _output(args.output) as fh:
        fh.write(point.report())
    return 0


def cmd_zernike(cfg: RunConfig, args) -> int:
    z = cfg.section("zernike")
    layout = zernike.solve_layout(z["wavelength"], z["splitter_spacing"], z["separation"],
                                  z["beam_width"], z["fringe_period"])
    shift = zernike.axial_shift(z["phase_shift"], z["wavelength"], layout.half_angle)
    field = zernike.ThreeBeamField.from_intensities(z["intensities"], phase=z["phase"],
                                                    half_angle=layout.half_angle, wavelength=z["wavelength"])
    x = np.linspace(-z["x_span"] / 2, z["x_span"] / 2, z["x_points"], endpoint=False)
    zz = np.linspace(-z["z_span"] / 2, z["z_span"] / 2, z["z_points"])
    imap = zernike.interference(field, x, zz)
    offsets = np.linspace(0.0, z["analyzer_period"], z["analyzer_points"], endpoint=False)
    signal = zernike.analyzer_scan(imap, 0.0, z["analyzer_period"], z["analyzer_duty"], offsets)

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    imap.to_csv(outdir / "zernike_pattern.csv")
    imap.to_matrix(outdir / "zernike_pattern.mat")
    zernike.write_scan(outdir / "zernike_scan.csv", offsets, signal)

    out = sys.stdout
    out.write(layout.report())
    out.write(f"central phase shift: {z['phase_shift']:.6g} rad\n")
    out.write(f"axial pattern shift: {shift * 1e6:.6g} um\n")
    vis = (signal.max() - signal.min()) / (signal.max() + signal.min())
    out.write(f"analyzer scan visibility: {vis:.6g}\n")
    return 0


def cmd_reduce(cfg: RunConfig, args) -> int:
    frame_path = Path(args.frame)
    if not frame_path.is_file():
        raise ConfigError(f"frame file not found: {frame_path}")
    spots, background = {}, None
    for spec in cfg["reduce.region"]:
        m, region = instrument.parse_region(spec)
        if m is None:
            if background is not None:
                raise ConfigError("more than one background region")
            background = region
        elif m in spots:
            raise ConfigError(f"duplicate region for order {m}")
        else:
            spots[m] = region
    if background is None:
        raise ConfigError("no background region in config")
    try:
        counts, pitch = instrument.read_frame(frame_path)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    frame = instrument.DetectorFrame(counts, spots, background, pitch)
    eta = instrument.reduce_frame(frame)
    with _output(args.output) as fh:
        instrument.write_efficiencies(fh, eta)
    return 0


COMMANDS = {
    "rock": (cmd_rock, "rocking-curve CSV from the convolved forward model"),
    "fit": (cmd_fit, "fit index modulation / thickness / angle offset to a rocking curve"),
    "design": (cmd_design, "find the tilt giving an equal three-port split"),
    "zernike": (cmd_zernike, "Zernike interferometer layout, pattern and analyzer scan"),
    "reduce": (cmd_reduce, "per-order efficiencies from a 2D detector frame"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="holoneutron", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        if name == "reduce":
            p.add_argument("frame", help="detector frame grid file")
        p.add_argument("config", nargs="?", help="run configuration (defaults used if omitted)")
        if name == "fit":
            p.add_argument("data", nargs="?", help="rocking-curve CSV")
            p.add_argument("--csv", help="write the parameter table here")
            p.add_argument("--allow-nonconverged", action="store_true")
        elif name == "zernike":
            p.add_argument("--outdir", default=".", help="directory for pattern and scan files")
        else:
            p.add_argument("-o", "--output", help="output file (default stdout)")
        p.add_argument("--emit-config", action="store_true", help="print the resolved configuration and exit")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    func, _ = COMMANDS[args.command]
    fmt = warnings.formatwarning
    warnings.formatwarning = lambda message, *_, **__: f"holoneutron: warning: {message}\n"
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return _dispatch(func, args)
    finally:
        warnings.formatwarning = fmt


def _dispatch(func, args) -> int:
    try:
        cfg = RunConfig.load(args.config)
        log.info("configuration: %s", cfg.source or "built-in defaults")
        if args.emit_config:
            sys.stdout.write(cfg.emit())
            return 0
        if args.command == "fit" and args.data is None:
            raise ConfigError("fit needs a data CSV")
        return func(cfg, args)
    except (ConfigError, DomainError, GeometryError, NoPropagatingOrderError, OSError) as exc:
        return _fail(EXIT_CONFIG, exc)
    except (AccuracyError, NoSignalError, FloatingPointError, ZeroDivisionError) as exc:
        return _fail(EXIT_NUMERIC, exc)
    except NonConvergedError as exc:
        return _fail(EXIT_NONCONVERGED, exc)


def _fail(code: int, exc: Exception) -> int:
    msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
    sys.stderr.write(f"holoneutron: error: {msg}\n")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
