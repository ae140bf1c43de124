"""Command-line front end: ``membranepol <command> --config run.yaml --out DIR``.

Every command validates the whole configuration before computing and writes
its files only once all results are available. Exit codes: 0 success, 2
configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from . import io
from .bem import InvertibilityError, SingularSystemError
from .config import ConfigError, EffectiveSpec, RunConfig, build_curve, load_config
from .deformation import DeformationBudgetError
from .effective import NearSingularError, effective_sweep, random_dilute_effective
from .geometry import GeometryError
from .imaging import (AnisotropicTensorError, ProbeDomain, PulseSpec, SuspensionInclusion,
                      anisotropy_statistic, estimate_debye, estimate_debye_from_data,
                      forward_solve, imaging_functional, pulse_response)
from .peaks import PeakNotFoundError, refine_peak
from .polarization import (PositivityError, mwf_circle, mwf_imag, mwf_peak_frequency,
                           shape_spectral_data, spectrum)

logger = logging.getLogger("membranepol")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
NUMERICAL_ERRORS = (PeakNotFoundError, PositivityError, SingularSystemError, NearSingularError,
                    DeformationBudgetError, InvertibilityError, ArithmeticError,
                    np.linalg.LinAlgError)


class _ConfigProblem(Exception):
    pass


def _m_columns(m):
    return [m[0, 0].real, m[0, 0].imag, m[0, 1].real, m[0, 1].imag, m[1, 1].real, m[1, 1].imag]


M_HEADER = ["re_m11", "im_m11", "re_m12", "im_m12", "re_m22", "im_m22"]


# -- commands -------------------------------------------------------------------

def cmd_mwf(cfg: RunConfig, args) -> dict:
    mwf = cfg.require("mwf")
    model, grid = cfg.model.build(), cfg.grid.build()
    r0 = mwf.r0
    w_star = mwf_peak_frequency(model, r0)
    rows = []
    for w in grid.omegas:
        m = mwf_circle(model, w, r0).m[0, 0]
        rows.append([w, m.real, m.imag, float(mwf_imag(model, w, r0)), w_star])
    im = np.array([r[2] for r in rows])
    w_peak = refine_peak(lambda w: float(mwf_imag(model, w, r0)), grid.omegas, im)
    summary = {"r0": r0, "omega_star": w_star, "omega_peak": w_peak, "tau": 1.0 / w_peak,
               "relative_peak_error": abs(w_peak - w_star) / w_star}
    return {"mwf_spectrum.csv": io.csv_text(["omega", "re_m", "im_m", "im_m_formula", "omega_star"], rows),
            "mwf_summary.json": io.json_text(summary)}


def _spectrum(cfg: RunConfig, args):
    geo = cfg.require("geometry")
    model, grid = cfg.model.build(), cfg.grid.build()
    bnds = geo.boundaries()
    spec = spectrum(bnds, model, grid, threads=args.threads)
    return geo, bnds, spec


def _spectrum_summary(geo, bnds, spec) -> dict:
    data = shape_spectral_data(bnds)
    return {"tau1": spec.tau1, "tau2": spec.tau2,
            "omega_peak1": spec.peak_omegas[0], "omega_peak2": spec.peak_omegas[1],
            "nodes": spec.nodes, "cells": len(bnds), "frame": geo.frame,
            "l1": data.l1, "l2": data.l2, "arclength": data.arclength}


def cmd_spectrum(cfg: RunConfig, args) -> dict:
    geo, bnds, spec = _spectrum(cfg, args)
    rows = [[w] + _m_columns(m) + [l1, l2]
            for w, m, l1, l2 in zip(spec.omegas, spec.tensors, spec.lambda1, spec.lambda2)]
    return {"spectrum.csv": io.csv_text(["omega"] + M_HEADER + ["lambda1", "lambda2"], rows),
            "spectrum_summary.json": io.json_text(_spectrum_summary(geo, bnds, spec))}


def cmd_debye(cfg: RunConfig, args) -> dict:
    geo, bnds, spec = _spectrum(cfg, args)
    return {"debye.json": io.json_text(_spectrum_summary(geo, bnds, spec))}


def cmd_effective(cfg: RunConfig, args) -> dict:
    geo = cfg.require("geometry")
    eff = cfg.effective or EffectiveSpec()
    model, grid = cfg.model.build(), cfg.grid.build()
    config = geo.build()
    if not config.unit_cell:
        raise _ConfigProblem("effective admittivity needs geometry.frame = unit_cell")
    if eff.mode == "random":
        ens = eff.ensemble
        seed = ens.seed if args.seed is None else args.seed
        res = random_dilute_effective(config, ens.build(), model, grid.omegas, ens.samples,
                                      seed, ens.tolerance, resum=ens.resum, threads=args.threads)
        tensors = res.tensors
    else:
        tensors = effective_sweep(config, model, grid.omegas, eff.mode, threads=args.threads)
    header = ["omega", "mode", "f", "re_k11", "im_k11", "re_k12", "im_k12",
              "re_k21", "im_k21", "re_k22", "im_k22", "n_samples", "stderr"]
    rows = []
    for t in tensors:
        k = t.k_star
        rows.append([t.omega, t.mode, t.f, k[0, 0].real, k[0, 0].imag, k[0, 1].real, k[0, 1].imag,
                     k[1, 0].real, k[1, 0].imag, k[1, 1].real, k[1, 1].imag, t.n_samples, t.stderr])
    return {"effective.csv": io.csv_text(header, rows)}


def _scene(cfg: RunConfig):
    im = cfg.require("imaging")
    model = cfg.model.build()
    probe = ProbeDomain(im.probe_radius, im.probe_nodes)
    boundary = build_curve(im.inclusion, im.inclusion_nodes)
    if im.cells.kind == "mwf":
        inc = SuspensionInclusion.circular_cells(boundary, im.f, model, im.cells.r0)
    else:
        geo = cfg.require("geometry")
        inc = SuspensionInclusion.from_cells(boundary, im.f, geo.boundaries(), model)
    inc.check_inside(probe)
    return im, model, probe, inc


def cmd_forward(cfg: RunConfig, args) -> dict:
    im, model, probe, inc = _scene(cfg)
    grid = cfg.grid.build()
    g = np.column_stack([probe.pattern((np.cos(a), np.sin(a))) for a in im.patterns])
    outputs, files = {}, []
    for k, w in enumerate(grid.omegas):
        u = forward_solve(probe, inc, w, g).u
        row = []
        for j in range(len(im.patterns)):
            name = f"u_w{k:03d}_p{j:02d}.csv"
            outputs[name] = io.forward_csv(probe.curve.points, u[:, j])
            row.append(name)
        files.append(row)
    manifest = {"omegas": grid.omegas, "patterns": im.patterns, "files": files,
                "probe_radius": im.probe_radius, "probe_nodes": im.probe_nodes, "f": im.f}
    outputs[io.MANIFEST] = io.json_text(manifest)
    return outputs


def cmd_image(cfg: RunConfig, args) -> dict:
    im = cfg.require("imaging")
    data_dir = args.data or im.data_dir
    grid = cfg.grid.build()
    report = {}
    if data_dir:
        if not Path(data_dir, io.MANIFEST).exists():
            raise _ConfigProblem(f"no forward data manifest in {data_dir}")
        manifest, omegas, u = io.read_forward_data(Path(data_dir))
        probe = ProbeDomain(manifest["probe_radius"], manifest["probe_nodes"])
        report["source"] = "data"
        norms = np.array([probe.l2_norm(imaging_functional(x, probe)) for x in u[:, 0, :]])
        est = None if _is_null(norms, u) else estimate_debye_from_data(omegas, u[:, 0, :], probe)
    else:
        _, model, probe, inc = _scene(cfg)
        report["source"] = "synthetic"
        omegas = grid.omegas
        if inc.f == 0:
            est, norms = None, np.zeros(len(omegas))
        else:
            est = estimate_debye(probe, inc, omegas, threads=args.threads)
            w_direct = _direct_peak(inc, omegas)
            report["omega_direct"] = w_direct
            report["tau_direct"] = None if w_direct is None else 1.0 / w_direct
    if est is None:
        # no inclusion signal: the functional vanishes identically
        report.update({"null": True, "tau_hat": None, "omega_hat": None, "peak_value": 0.0})
    else:
        norms = est.norms
        report.update({"null": False, "tau_hat": est.tau_hat, "omega_hat": est.omega_hat,
                       "peak_value": est.peak_value})
    sweep = io.csv_text(["omega", "functional_norm"], zip(omegas, norms))
    return {"image.json": io.json_text(report), "image_sweep.csv": sweep}


def _is_null(norms, u) -> bool:
    scale = float(np.max(np.abs(u))) if u.size else 0.0
    return float(np.max(norms, initial=0.0)) <= 1e-13 * max(scale, 1e-300)


def _direct_peak(inc, omegas):
    """Peak of tr Im M of the cells, the reference for the imaging estimate."""
    def trace(w):
        return float(np.trace(np.imag(inc.tensor(w))))
    values = np.array([trace(w) for w in omegas])
    try:
        return refine_peak(trace, omegas, values)
    except PeakNotFoundError:
        return None


def cmd_anisotropy(cfg: RunConfig, args) -> dict:
    im, model, probe, inc = _scene(cfg)
    omegas = im.anisotropy_omegas or cfg.grid.build().omegas
    angles = np.linspace(0, np.pi, im.angles, endpoint=False)
    rows, table = [], []
    for w in omegas:
        st = anisotropy_statistic(probe, inc, w, angles)
        lam = st.eigenvalues
        rows.append([w, st.ratio, lam[0] / lam[1], st.s_min, st.s_max])
        table.append({"omega": w, "ratio": st.ratio, "lambda_ratio": lam[0] / lam[1]})
    return {"anisotropy.csv": io.csv_text(["omega", "ratio", "lambda_ratio", "s_min", "s_max"], rows),
            "anisotropy.json": io.json_text({"rows": table})}


def cmd_pulse(cfg: RunConfig, args) -> dict:
    pb = cfg.require("pulse")
    grid = cfg.grid.build()
    specs = []
    for s in pb.suspensions:
        model = (s.model or cfg.model).build()
        geo = s.geometry or cfg.require("geometry")
        specs.append(spectrum(geo.boundaries(), model, grid, threads=args.threads))
    center = pb.center or 1.0 / specs[0].tau1
    pulse = PulseSpec(center, pb.bandwidth_fraction * center, pb.n_times, pb.n_freq)
    resp = pulse_response(pulse, specs)
    sup = resp.sup_norms
    names = [s.name for s in pb.suspensions]
    report = {"center": center, "bandwidth": pulse.bandwidth,
              "sup_norms": dict(zip(names, sup)),
              "ratios_to_first": dict(zip(names, sup / sup[0])),
              "omega_peaks": {n: sp.peak_omegas for n, sp in zip(names, specs)}}
    norms = np.linalg.norm(resp.responses, axis=(-2, -1))
    rows = [[t] + list(norms[:, i]) for i, t in enumerate(resp.times)]
    return {"pulse.json": io.json_text(report),
            "pulse.csv": io.csv_text(["t"] + [f"norm_{n}" for n in names], rows)}


COMMANDS = {
    "mwf": (cmd_mwf, "closed-form circle tensor over the grid"),
    "spectrum": (cmd_spectrum, "polarization tensor spectrum and Debye times"),
    "debye": (cmd_debye, "Debye relaxation times only"),
    "effective": (cmd_effective, "effective admittivity (dilute, periodic or random)"),
    "forward": (cmd_forward, "synthetic boundary data for the imaging scene"),
    "image": (cmd_image, "Debye time from boundary data via the imaging functional"),
    "anisotropy": (cmd_anisotropy, "anisotropy statistic versus frequency"),
    "pulse": (cmd_pulse, "time-domain response of suspensions to a bandpass pulse"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="membranepol", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path, help="YAML run configuration")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
        p.add_argument("--seed", type=int, default=None, help="RNG seed (random mode)")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "image":
            p.add_argument("--data", type=Path, default=None, help="forward-data directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        parser.error("--seed must be an unsigned 64-bit integer")
    func = COMMANDS[args.command][0]
    try:
        cfg = load_config(args.config)
        outputs = func(cfg, args)
    except (ConfigError, ValidationError, GeometryError, _ConfigProblem) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AnisotropicTensorError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in io.commit(outputs, args.out):
        logger.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
