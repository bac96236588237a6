"""CSV, JSON and SVG emission for analysis results."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

SIG_DIGITS = 9


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, f".{SIG_DIGITS}g")


def _round(obj):
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return None
        return float(format(float(obj), f".{SIG_DIGITS}g"))
    return obj


def dumps(obj) -> str:
    """Canonical JSON: insertion key order, floats at 9 significant digits, NaN as null."""
    return json.dumps(_round(obj), indent=2)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def spot_rows(spot):
    xy = np.full((len(spot.pupil), 2), np.nan)
    xy[spot.alive] = spot.points
    for i, ((px, py), (x, y), ok) in enumerate(zip(spot.pupil, xy, spot.alive)):
        yield [i, fmt(px), fmt(py), fmt(x), fmt(y), int(ok)]


def write_spot_csv(path, spot) -> None:
    _write_rows(path, ["ray_id", "pupil_x", "pupil_y", "image_x_um", "image_y_um", "alive"], spot_rows(spot))


def write_fan_csv(path, *fans) -> None:
    rows = ([fmt(p), fmt(v), f.kind] for f in fans for p, v in zip(f.pupil, f.values))
    _write_rows(path, ["pupil", "value", "kind"], rows)


def write_mc_csv(path, samples) -> None:
    rows = (
        [i, fmt(na), fmt(rms), fmt(geo), fmt(fs), int(bad)]
        for i, (na, rms, geo, fs, bad) in enumerate(zip(
            samples.na, samples.rms_spot_um, samples.geo_spot_um, samples.focus_shift_um, samples.failed))
    )
    _write_rows(path, ["sample", "na", "rms_um", "geo_um", "focus_shift_um", "failed"], rows)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- SVG ----------------------------------------------------------------------

def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "microlens"
    return plt


def _save_svg(fig, path) -> None:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    Path(path).write_text(buf.getvalue())


def spot_svg(spot, path) -> None:
    plt = _figure()
    fig, ax = plt.subplots(figsize=(4, 4))
    cx, cy = spot.centroid
    ax.plot(spot.points[:, 0] - cx, spot.points[:, 1] - cy, ".", ms=3)
    ax.set_aspect("equal")
    ax.set_xlabel("x - centroid (um)")
    ax.set_ylabel("y - centroid (um)")
    ax.set_title(f"z = {spot.image_z_um:.3f} um, geo {spot.geo_radius_um:.3f} um, rms {spot.rms_radius_um:.3f} um")
    _save_svg(fig, path)
    plt.close(fig)


def fan_svg(fan, path) -> None:
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(fan.pupil, fan.values, "-o", ms=3)
    ax.axhline(0, color="0.6", lw=0.8)
    ax.set_xlabel("normalized pupil coordinate")
    ax.set_ylabel("transverse aberration (um)" if fan.kind == "ray" else "OPD (waves)")
    ax.set_title(f"{fan.kind} fan at z = {fan.reference_z_um:.3f} um")
    _save_svg(fig, path)
    plt.close(fig)
