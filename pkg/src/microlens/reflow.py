"""Volume-conserving thermal-reflow surrogate.

A resist cylinder of footprint D and height t_r melts into a spherical cap
on the same footprint. Volume balance::

    (pi D^2 / 4) t_r * retention = (pi h / 6) (3 D^2 / 4 + h^2)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .optics_core import CapGeometry, GeometryError, cap_radius


@dataclass(frozen=True)
class ResistCylinder:
    diameter_um: float
    thickness_um: float

    def __post_init__(self):
        if self.diameter_um <= 0 or self.thickness_um < 0:
            raise GeometryError("resist cylinder needs positive diameter and non-negative thickness")

    @property
    def volume_um3(self) -> float:
        return math.pi * self.diameter_um ** 2 / 4 * self.thickness_um


def _cap_volume(diameter_um: float, sag_um: float) -> float:
    return math.pi * sag_um / 6 * (3 * diameter_um ** 2 / 4 + sag_um ** 2)


def reflow_predict(cyl: ResistCylinder, retention: float = 1.0) -> CapGeometry:
    """Cap formed from ``cyl`` with the contact line pinned at its footprint.

    The cap height is found by bisection on the volume cubic, to relative
    precision. A zero-height
    cylinder yields a flat cap (sag and curvature radius ``inf`` by convention).
    """
    d = cyl.diameter_um
    volume = cyl.volume_um3 * retention
    if volume == 0:
        return CapGeometry(d, 0.0, math.inf)
    hemi = _cap_volume(d, d / 2)
    if volume > hemi * (1 + 1e-12):
        raise GeometryError(
            f"resist volume {volume:.6g} um^3 exceeds the hemisphere on D={d} um ({hemi:.6g} um^3)")
    # h (3a^2 + h^2) = 6 a^2 t with h <= a pins h between 1.5 t and 2 t
    t_eff = volume / (math.pi * d * d / 4)
    hi = min(2.0 * t_eff, d / 2)
    lo = min(1.5 * t_eff, hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _cap_volume(d, mid) < volume:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    h = 0.5 * (lo + hi)
    return CapGeometry(d, h, cap_radius(d, h))


def reflow_required_thickness(diameter_um: float, target_sag_um: float, retention: float = 1.0) -> float:
    """Resist height that reflows into a cap of height ``target_sag_um``."""
    if diameter_um <= 0 or target_sag_um <= 0:
        raise GeometryError("diameter and target sag must be positive")
    if target_sag_um > diameter_um / 2:
        raise GeometryError(f"sag {target_sag_um} beyond a hemisphere on D={diameter_um}")
    a2 = diameter_um ** 2 / 4
    return target_sag_um * (3 * a2 + target_sag_um ** 2) / (6 * a2) / retention
