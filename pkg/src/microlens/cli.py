"""Command-line entry point.

Exit codes: 0 success, 2 input or validation error, 3 numerical or trace failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import export, paraxial, raytrace, reflow, tolerance
from .aberration_fit import RankDeficiencyError, RaySample, fit_expansion
from .optics_core import GeometryError, load_prescription, save_prescription, validate_prescription
from .optimizer import DesignSpec, design_start, merit, optimize
from .search import BracketError

EXIT_INPUT = 2
EXIT_NUMERIC = 3


class InputError(Exception):
    pass


def _emit(obj) -> None:
    sys.stdout.write(export.dumps(obj) + "\n")


def _load_valid(path):
    try:
        p = load_prescription(path)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read prescription {path}: {exc}") from exc
    bad = validate_prescription(p)
    if bad:
        raise InputError("; ".join(str(v) for v in bad))
    return p


def _params_from_args(args) -> paraxial.BiconvexParams:
    if args.prescription:
        p = _load_valid(args.prescription)
        s = p.surfaces
        if len(s) == 1 or len(s) > 2:
            raise InputError("NA formulas need a one- or two-surface prescription")
        return paraxial.BiconvexParams(
            p.entrance_beam_diameter_um, s[0].radius_um, s[1].radius_um,
            s[1].vertex_z_um - s[0].vertex_z_um, s[0].medium_after.refractive_index,
            front_diameter_um=2 * s[0].semi_aperture_um)
    if args.plano:
        missing = [f for f in ("d", "h") if getattr(args, f) is None]
        if missing:
            raise InputError(f"--plano needs {', '.join('--' + m for m in missing)}")
        return paraxial.cap_params(args.d, args.h, args.n)
    missing = [f for f in ("d", "r1", "r2", "t") if getattr(args, f) is None]
    if missing:
        raise InputError(f"--biconvex needs {', '.join('--' + m for m in missing)}")
    p = paraxial.BiconvexParams(args.d, args.r1, args.r2, args.t, args.n, front_diameter_um=args.front_d)
    bad = p.violations()
    if bad:
        raise InputError("; ".join(bad))
    return p


def cmd_na(args) -> None:
    p = _params_from_args(args)
    out = {"na": paraxial.na_biconvex(p)}
    if args.plano:
        out["na_cap_formula"] = paraxial.na_single(args.d, args.h, args.n)
    out["spot_size_um"] = paraxial.diffraction_spot(p, args.wavelength_nm * 1e-3)
    out["focal_length_um"] = paraxial.effective_focal_length(p)
    _emit(out)


def cmd_spotsize(args) -> None:
    p = _params_from_args(args)
    _emit({
        "spot_size_um": paraxial.diffraction_spot(p, args.wavelength_nm * 1e-3),
        "na": paraxial.na_biconvex(p),
        "wavelength_nm": args.wavelength_nm,
    })


def cmd_validate(args) -> None:
    try:
        p = load_prescription(args.prescription)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    bad = validate_prescription(p)
    _emit({"valid": not bad, "violations": [str(v) for v in bad]})
    if bad:
        raise SystemExit(EXIT_INPUT)


def cmd_analyze(args) -> None:
    p = _load_valid(args.prescription)
    pt = raytrace._PupilTrace(p, args.rings)
    z_par = raytrace.find_paraxial_focus(p)
    z_best = pt.best_focus()
    spot = pt.spot(z_best)
    rfan = raytrace.ray_fan(p, args.fan_samples, z_best)
    ofan = raytrace.opd_fan(p, args.fan_samples, z_best)
    if args.spot:
        export.write_spot_csv(args.spot, spot)
    if args.rayfan:
        export.write_fan_csv(args.rayfan, rfan)
    if args.opdfan:
        export.write_fan_csv(args.opdfan, ofan)
    if args.svg:
        out = Path(args.svg)
        out.mkdir(parents=True, exist_ok=True)
        export.spot_svg(spot, out / "spot.svg")
        export.fan_svg(rfan, out / "rayfan.svg")
        export.fan_svg(ofan, out / "opdfan.svg")
    _emit({
        "paraxial_focus_z_um": z_par,
        "best_focus_z_um": z_best,
        "geo_radius_um": spot.geo_radius_um,
        "rms_radius_um": spot.rms_radius_um,
        "n_rays": len(spot.pupil),
        "n_vignetted": spot.n_vignetted,
        "peak_ray_fan_um": rfan.peak,
        "peak_opd_waves": ofan.peak,
    })


def cmd_optimize(args) -> None:
    spec = DesignSpec(target_na=args.target_na, diameter_um=args.d, index=args.n,
                      front_diameter_um=args.front_d, wavelength_nm=args.wavelength_nm)
    if args.start:
        start = np.array([float(v) for v in args.start.split(",")])
        if start.shape != (3,):
            raise InputError("--start takes R1,|R2|,t")
    elif args.design_start:
        start = design_start(spec)
    else:
        start = None
    res = optimize(spec, start, seed=args.seed, n_starts=args.starts)
    out = {
        "r1_um": res.r1_um, "r2_um": res.r2_um, "t_um": res.t_um,
        "achieved_na": res.achieved_na, "merit_um": res.merit_um,
        "iterations": res.iterations, "converged": res.converged,
        "seed": args.seed,
    }
    if args.design_start or args.start:
        out["start_merit_um"] = merit(spec.clip(start), spec)
    if args.out_prescription:
        save_prescription(paraxial.to_prescription(res.params(spec), args.wavelength_nm), args.out_prescription)
    _emit(out)


def cmd_reflow(args) -> None:
    if args.target_sag_um is not None:
        t = reflow.reflow_required_thickness(args.diameter_um, args.target_sag_um, args.retention)
        _emit({"diameter_um": args.diameter_um, "target_sag_um": args.target_sag_um, "thickness_um": t})
        return
    if args.thickness_um is None:
        raise InputError("reflow needs --thickness-um (forward) or --target-sag-um (inverse)")
    cap = reflow.reflow_predict(reflow.ResistCylinder(args.diameter_um, args.thickness_um), args.retention)
    _emit({"diameter_um": cap.diameter_um, "sag_um": cap.sag_um, "radius_um": cap.radius_um,
           "sag_ratio": cap.sag_ratio})


def cmd_tolerance(args) -> None:
    nominal = tolerance.as_fabricated(args.n) if args.nominal == "fabricated" else paraxial.reference_design(args.n)
    base = tolerance.PerturbationSpec.lens_array_diameters() if args.lens_array_diameters \
        else tolerance.PerturbationSpec()
    kw = {"n_samples": args.n_samples, "seed": args.seed}
    for name in ("sigma_h_front", "sigma_D_front", "sigma_h_rear", "sigma_D_rear", "sigma_decenter_um"):
        val = getattr(args, name)
        kw[name] = getattr(base, name) if val is None else val
    spec = tolerance.PerturbationSpec(**kw)
    samples = tolerance.sample_mc(nominal, spec, workers=args.workers)
    report = tolerance.summarize(samples, spec.seed)
    if args.csv:
        export.write_mc_csv(args.csv, samples)
    _emit(report.to_dict())


def _samples_from_csv(path) -> list[RaySample]:
    rows = export.read_csv(path)
    if not rows:
        raise InputError(f"{path} has no rows")
    cols = set(rows[0])
    if {"s", "h", "theta", "x_um", "y_um"} <= cols:
        return [RaySample(float(r["s"]), float(r["h"]), float(r["theta"]),
                          float(r["x_um"]), float(r["y_um"])) for r in rows]
    if {"pupil_x", "pupil_y", "image_x_um", "image_y_um", "alive"} <= cols:
        out = []
        for r in rows:
            if not int(r["alive"]):
                continue
            px, py = float(r["pupil_x"]), float(r["pupil_y"])
            out.append(RaySample(min(1.0, float(np.hypot(px, py))), 0.0, float(np.arctan2(px, py)),
                                 float(r["image_x_um"]), float(r["image_y_um"])))
        return out
    raise InputError(f"{path}: unrecognized columns {sorted(cols)}")


def cmd_fit(args) -> None:
    try:
        samples = _samples_from_csv(args.input)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read ray samples from {args.input}: {exc}") from exc
    res = fit_expansion(samples, args.order, symmetric_a1=args.symmetric_a1)
    _emit(res.to_dict())


def _geometry_flags(sp):
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--biconvex", action="store_true", help="two-surface lens from --d --r1 --r2 --t")
    g.add_argument("--plano", action="store_true", help="single cap from --d --h")
    g.add_argument("--prescription", help="prescription JSON file")
    sp.add_argument("--d", type=float, help="limiting aperture diameter (um)")
    sp.add_argument("--front-d", type=float, help="front clear aperture (um)")
    sp.add_argument("--h", type=float, help="cap sag (um)")
    sp.add_argument("--r1", type=float, help="front radius, signed (um)")
    sp.add_argument("--r2", type=float, help="rear radius, signed (um)")
    sp.add_argument("--t", type=float, help="vertex thickness (um)")
    sp.add_argument("--n", type=float, default=paraxial.DEFAULT_INDEX, help="refractive index")
    sp.add_argument("--wavelength-nm", type=float, default=paraxial.HENE_WAVELENGTH_NM)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="microlens", description="bi-convex micro lens design toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("na", help="numerical aperture from closed-form formulas")
    _geometry_flags(sp)
    sp.set_defaults(func=cmd_na)

    sp = sub.add_parser("spotsize", help="diffraction-limited spot size")
    _geometry_flags(sp)
    sp.set_defaults(func=cmd_spotsize)

    sp = sub.add_parser("validate", help="check a prescription file")
    sp.add_argument("prescription")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("analyze", help="spot diagram, ray fan and OPD fan at best focus")
    sp.add_argument("prescription")
    sp.add_argument("--spot", help="write spot CSV here")
    sp.add_argument("--rayfan", help="write ray-fan CSV here")
    sp.add_argument("--opdfan", help="write OPD-fan CSV here")
    sp.add_argument("--svg", help="directory for SVG plots")
    sp.add_argument("--rings", type=int, default=raytrace.DEFAULT_RINGS)
    sp.add_argument("--fan-samples", type=int, default=21)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("optimize", help="minimize best-focus rms spot at a target NA")
    sp.add_argument("--target-na", type=float, default=paraxial.DESIGN_NA)
    sp.add_argument("--d", type=float, default=paraxial.DESIGN_REAR_DIAMETER)
    sp.add_argument("--front-d", type=float, default=paraxial.DESIGN_FRONT_DIAMETER)
    sp.add_argument("--n", type=float, default=paraxial.DEFAULT_INDEX)
    sp.add_argument("--wavelength-nm", type=float, default=paraxial.HENE_WAVELENGTH_NM)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--starts", type=int, default=None, help="number of starts (default 8, or 1 with a start)")
    sp.add_argument("--start", help="R1,|R2|,t start point (um)")
    sp.add_argument("--design-start", action="store_true", help="start from the as-designed lens")
    sp.add_argument("--out-prescription", help="write the optimized prescription JSON here")
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("reflow", help="resist cylinder to spherical cap (and inverse)")
    sp.add_argument("--diameter-um", type=float, required=True)
    sp.add_argument("--thickness-um", type=float)
    sp.add_argument("--target-sag-um", type=float)
    sp.add_argument("--retention", type=float, default=1.0, help="fraction of resist volume kept")
    sp.set_defaults(func=cmd_reflow)

    sp = sub.add_parser("tolerance", help="Monte Carlo fabrication tolerance")
    sp.add_argument("--nominal", choices=("design", "fabricated"), default="design")
    sp.add_argument("--n", type=float, default=paraxial.DEFAULT_INDEX)
    sp.add_argument("--n-samples", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sigma-h-front", dest="sigma_h_front", type=float)
    sp.add_argument("--sigma-d-front", dest="sigma_D_front", type=float)
    sp.add_argument("--sigma-h-rear", dest="sigma_h_rear", type=float)
    sp.add_argument("--sigma-d-rear", dest="sigma_D_rear", type=float)
    sp.add_argument("--sigma-decenter-um", dest="sigma_decenter_um", type=float)
    sp.add_argument("--lens-array-diameters", action="store_true",
                    help="use cast-lens diameter scatter instead of resist scatter")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--csv", help="write per-sample metrics here")
    sp.set_defaults(func=cmd_tolerance)

    sp = sub.add_parser("fit", help="fit the transverse aberration series to ray data")
    sp.add_argument("--input", required=True, help="CSV with s,h,theta,x_um,y_um or a spot CSV")
    sp.add_argument("--order", type=int, choices=(3, 5), default=3)
    sp.add_argument("--symmetric-a1", action="store_true", help="use A1 s sin(theta) for the first x term")
    sp.set_defaults(func=cmd_fit)
    for sp in sub.choices.values():
        sp.set_defaults(usage=sp.format_usage())
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (InputError, GeometryError) as exc:
        sys.stderr.write(args.usage)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (raytrace.TraceError, BracketError, RankDeficiencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SystemExit as exc:
        return int(exc.code or 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
