"""Command-line entry point ``slitwave``.

Every subcommand reads one config (the packaged default when ``--config``
is omitted), applies ``--set key=value`` overrides and writes CSV/JSON
files into ``output_dir``.  Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings

import numpy as np

from . import io
from .engine import bragg_angle, contrast, intensities_cumulant, intensities_exact, propagating_orders
from .errors import SlitwaveError
from .inference import ShiftBand, effective_width_model, efimov_upper_limit, fit_bond_length, fit_pattern
from .peaks import extract_peaks, synthesize_scan
from .transmission import Species, de_broglie

log = logging.getLogger("slitwave")


def _simulate(cfg, geom, model, beam):
    if cfg["method"] == "exact":
        return intensities_exact(geom, model, beam, cfg["n_max"])
    return intensities_cumulant(geom, model, beam, cfg["n_max"])


def cmd_geometry(cfg, args):
    geom = cfg.geometry()
    out = {"provenance": io.provenance(cfg, "geometry"), "geometry": geom.as_dict()}
    io.write_json(io.output_path(cfg, "geometry.json"), out)
    print(json.dumps(geom.as_dict(), sort_keys=True, indent=2))


def cmd_simulate(cfg, args):
    geom = cfg.geometry()
    model = cfg.transmission_model(geom)
    beam = cfg.beam()
    pattern = _simulate(cfg, geom, model, beam)
    meta = io.provenance(cfg, "simulate")
    meta["wavelength_nm"] = beam.wavelength
    io.write_csv(io.output_path(cfg, "pattern.csv"), io.PATTERN_COLUMNS, io.pattern_rows(pattern), meta)
    io.write_csv(io.output_path(cfg, "contrast.csv"), io.CONTRAST_COLUMNS, contrast(pattern), meta)
    if args.scan:
        rng = np.random.default_rng(cfg["seed"])
        pos = np.degrees(pattern.theta)
        areas = cfg["scan_counts"] * pattern.intensity
        areas = areas * (1 + cfg["noise"] * rng.standard_normal(areas.size))
        scan = synthesize_scan(pos, areas, width_deg=cfg["peak_width_deg"],
                               background=cfg["scan_background"], step_deg=cfg["scan_step_deg"])
        err = np.sqrt(np.maximum(scan.rate, 1.0))
        rows = zip(scan.theta_deg.tolist(), scan.rate.tolist(), err.tolist())
        io.write_csv(io.output_path(cfg, "scan.csv"), io.SCAN_COLUMNS, rows, meta)
    for n, c in contrast(pattern):
        print(f"n={n:2d}  I_n/I_0={pattern.get(n).intensity:.6g}  C_n={c:+.4f}")


def cmd_extract_peaks(cfg, args):
    geom = cfg.geometry()
    beam = cfg.beam()
    scan = io.read_scan(args.input)
    expected = {n: math.degrees(t) for n, t in propagating_orders(geom, beam, cfg["n_max"])}
    others = []
    for sp in args.other_species or ():
        other = de_broglie(sp, beam.velocity)
        # every species shares the undiffracted beam, so n = 0 is never a blend
        others += [math.degrees(bragg_angle(geom, other, n))
                   for n, _ in propagating_orders(geom, other, cfg["n_max"]) if n != 0]
    table = extract_peaks(scan, expected, snr_threshold=cfg["snr_threshold"],
                          rel_error_floor=cfg["rel_error_floor"], other_peaks_deg=others)
    io.write_csv(io.output_path(cfg, "peaks.csv"), io.PEAK_COLUMNS, io.peak_rows(table),
                 io.provenance(cfg, "extract-peaks"))
    print(f"{int(table.present.sum())} of {table.n.size} orders extracted")


def cmd_fit_pattern(cfg, args):
    geom = cfg.geometry()
    beam = cfg.beam()
    table = io.read_peak_table(args.input)
    fixed = {"gamma": 0.0} if cfg["fix_gamma"] else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        fit = fit_pattern(table, geom, beam, fixed=fixed, start=cfg["fit_start"])
    for w in caught:
        log.warning("%s", w.message)
    out = {
        "provenance": io.provenance(cfg, "fit-pattern"),
        "params": fit.params,
        "errors": fit.errors,
        "covariance": fit.covariance,
        "chi2": fit.chi2,
        "dof": fit.dof,
        "s_perp_eff_nm": fit.s_perp_eff,
        "s_perp_eff_err_nm": fit.s_perp_eff_err,
        "warnings": list(fit.warnings),
    }
    io.write_json(io.output_path(cfg, "fit_pattern.json"), out)
    print(f"s_perp_eff = {fit.s_perp_eff:.4f} +- {fit.s_perp_eff_err:.4f} nm  chi2/dof = {fit.chi2:.3g}/{fit.dof}")


def cmd_fit_size(cfg, args):
    geom = cfg.geometry()
    model = cfg.transmission_model(geom)
    species = cfg.species
    series = io.read_series(args.input)
    fit = fit_bond_length(series, geom, model, species, r_max=cfg["r_max_nm"])
    meta = io.provenance(cfg, "fit-size")
    rows = []
    for v, s, e in series:
        beam = de_broglie(species, v, check_band=False)
        rows.append((v, s, e, effective_width_model(fit.r, geom, model, beam)))
    io.write_csv(io.output_path(cfg, "series.csv"), io.SERIES_COLUMNS, rows, meta)
    io.write_csv(io.output_path(cfg, "profile.csv"), io.PROFILE_COLUMNS, fit.profile, meta)
    out = {"provenance": meta, "r_nm": fit.r, "err_plus_nm": fit.err_plus, "err_minus_nm": fit.err_minus,
           "chi2": fit.chi2, "dof": fit.dof, "residuals": list(fit.residuals), "one_sided": fit.one_sided}
    io.write_json(io.output_path(cfg, "fit_size.json"), out)
    print(f"<r> = {fit.r:.3f} +{fit.err_plus:.3f}/-{fit.err_minus:.3f} nm")


def cmd_efimov_limit(cfg, args):
    geom = cfg.geometry()
    model = cfg.transmission_model(geom)
    band = ShiftBand(cfg["band_plus_nm"], cfg["band_minus_nm"], cfg["band_centre_nm"])
    res = efimov_upper_limit(geom, model, cfg.velocities(), cfg["r_ground_nm"], cfg["r_efimov_nm"],
                             band=band, n_max=cfg["n_max"], method=cfg["method"],
                             rel_error=cfg["rel_error_floor"] or 0.05)
    meta = io.provenance(cfg, "efimov-limit")
    io.write_csv(io.output_path(cfg, "efimov_curve.csv"), io.EFIMOV_COLUMNS, res.curve, meta)
    io.write_json(io.output_path(cfg, "efimov.json"),
                  {"provenance": meta, "limit": res.limit, "one_sided": res.one_sided})
    bound = "no crossing up to" if res.one_sided else "limit"
    print(f"Efimov fraction {bound} {100 * res.limit:.2f}%")


COMMANDS = {
    "geometry": (cmd_geometry, "derived grating geometry", None),
    "simulate": (cmd_simulate, "diffraction pattern and contrast tables", None),
    "extract-peaks": (cmd_extract_peaks, "peak table from an angular scan CSV", "scan CSV"),
    "fit-pattern": (cmd_fit_pattern, "fit the intensity formula to a peak table", "peak-table CSV"),
    "fit-size": (cmd_fit_size, "bond length from a velocity series of widths", "series CSV"),
    "efimov-limit": (cmd_efimov_limit, "upper limit on an Efimov admixture", None),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="slitwave", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text, input_help) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="config file (default: packaged defaults)")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config value; repeatable")
        p.add_argument("--output-dir", help="shorthand for --set output_dir=...")
        p.add_argument("--seed", type=int, help="shorthand for --set seed=...")
        if input_help:
            p.add_argument("input", help=input_help)
        if name == "simulate":
            p.add_argument("--scan", action="store_true", help="also write a synthetic angular scan")
        if name == "extract-peaks":
            p.add_argument("--other-species", action="append", choices=[s.name.lower() for s in Species],
                           help="flag orders blended with this species' peaks; repeatable")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    overrides = list(args.overrides)
    if args.output_dir is not None:
        overrides.append(f"output_dir={args.output_dir}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    inputs = {"input": args.input} if getattr(args, "input", None) else None
    handler = COMMANDS[args.command][0]
    try:
        cfg = io.load_config(args.config, overrides, inputs)
        handler(cfg, args)
    except SlitwaveError as exc:
        problems = getattr(exc, "problems", None) or [str(exc)]
        for p in problems:
            print(f"slitwave: error: {p}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
