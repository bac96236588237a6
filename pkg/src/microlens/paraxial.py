"""Closed-form numerical aperture, spot size and focal length.

The two-surface lens is described by :class:`BiconvexParams`; helpers turn it
into a traceable :class:`~microlens.optics_core.LensPrescription`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .optics_core import (
    AIR,
    GeometryError,
    LensPrescription,
    Material,
    SphericalSurface,
    cap_radius,
    cap_sag,
)

# PDMS near 633 nm; never stated by the source design, so always overridable.
DEFAULT_INDEX = 1.43
HENE_WAVELENGTH_NM = 632.8
AIRY_FACTOR = 1.64

# As-designed dimensions of the assembled lens (um).
DESIGN_FRONT_DIAMETER = 97.6
DESIGN_REAR_DIAMETER = 60.0
DESIGN_R1 = 79.7
DESIGN_R2 = -43.5
DESIGN_NA = 0.379


@dataclass(frozen=True)
class BiconvexParams:
    """Thick two-surface lens.

    ``diameter_um`` is the limiting beam diameter (rear clear aperture by
    default). ``front_diameter_um`` only sets the clear aperture of the first
    surface; when omitted it equals ``diameter_um``. ``r2_um=None`` means a
    planar rear face.
    """

    diameter_um: float
    r1_um: float
    r2_um: float | None
    thickness_um: float
    index: float = DEFAULT_INDEX
    front_diameter_um: float | None = None

    @property
    def front_aperture_um(self) -> float:
        return self.diameter_um if self.front_diameter_um is None else self.front_diameter_um

    def violations(self) -> list[str]:
        out = []
        if self.thickness_um < 0:
            out.append("thickness must be >= 0")
        if not self.r1_um > 0:
            out.append("front radius must be positive for a bi-convex lens")
        if self.r2_um is not None and not self.r2_um < 0:
            out.append("rear radius must be negative for a bi-convex lens")
        if not self.index > 1:
            out.append("index must exceed 1")
        if self.diameter_um <= 0:
            out.append("diameter must be positive")
        if not out and self.edge_thickness_um() < -1e-9:
            out.append("front and rear caps overlap (negative edge thickness)")
        return out

    def edge_thickness_um(self) -> float:
        """Axial gap left between the two caps at their clear-aperture rims."""
        try:
            front = cap_sag(self.front_aperture_um, self.r1_um)
            rear = 0.0 if self.r2_um is None else cap_sag(self.diameter_um, abs(self.r2_um))
        except GeometryError:
            return -math.inf
        return self.thickness_um - front - rear


def _power_bracket(r1: float, r2: float | None, t: float, n: float) -> float:
    if r1 == 0 or r2 == 0:
        raise GeometryError("radius of zero is not a surface")
    c1 = 1.0 / r1
    c2 = 0.0 if r2 is None else 1.0 / r2
    return c1 - c2 + (n - 1) * t * c1 * c2 / n


def na_single(diameter_um: float, sag_um: float, index: float) -> float:
    """NA of a single spherical cap lens: 4Dh(n-1) / (D^2 + 4h^2)."""
    if diameter_um <= 0 or sag_um <= 0:
        raise GeometryError(f"need positive D and h, got D={diameter_um}, h={sag_um}")
    return 4 * diameter_um * sag_um * (index - 1) / (diameter_um ** 2 + 4 * sag_um ** 2)


def lens_power(p: BiconvexParams) -> float:
    """Optical power (1/um) of the thick lens in air."""
    return (p.index - 1) * _power_bracket(p.r1_um, p.r2_um, p.thickness_um, p.index)


def na_biconvex(p: BiconvexParams) -> float:
    """D(n-1)/2 [1/R1 - 1/R2 + (n-1)t/(n R1 R2)] with signed radii."""
    return p.diameter_um * lens_power(p) / 2


def diffraction_spot(p: BiconvexParams, wavelength_um: float) -> float:
    """Diffraction-limited spot size 1.64 lambda / (D (n-1) [...]), i.e. 0.82 lambda / NA."""
    na = na_biconvex(p)
    if na <= 0:
        raise GeometryError(f"spot size undefined for non-positive NA {na}")
    return AIRY_FACTOR * wavelength_um / (p.diameter_um * lens_power(p))


def effective_focal_length(p: BiconvexParams) -> float:
    phi = lens_power(p)
    if phi == 0:
        raise GeometryError("lens has zero optical power")
    return 1.0 / phi


def back_focal_length(p: BiconvexParams) -> float:
    """Distance from the rear vertex to the paraxial focus."""
    f = effective_focal_length(p)
    return f * (1 - (p.index - 1) * p.thickness_um / (p.index * p.r1_um))


def solve_thickness(
    diameter_um: float,
    r1_um: float,
    r2_um: float,
    index: float,
    target_na: float,
) -> float:
    """Thickness at which the thick-lens NA equals ``target_na``.

    NA is linear in t, so the root is explicit.
    """
    base = 1.0 / r1_um - 1.0 / r2_um
    slope = (index - 1) / (index * r1_um * r2_um)
    if slope == 0:
        raise GeometryError("thickness has no effect on NA with a planar surface")
    t = (2 * target_na / (diameter_um * (index - 1)) - base) / slope
    if t < 0:
        raise GeometryError(f"target NA {target_na} needs negative thickness {t:.4g} um")
    return t


def reference_design(index: float = DEFAULT_INDEX, target_na: float = DESIGN_NA,
                 use_front_diameter: bool = False) -> BiconvexParams:
    """The as-designed bi-convex lens with thickness back-solved for ``target_na``.

    ``use_front_diameter`` switches the aperture entering the NA formula from
    the limiting rear diameter to the front diameter.
    """
    d = DESIGN_FRONT_DIAMETER if use_front_diameter else DESIGN_REAR_DIAMETER
    t = solve_thickness(d, DESIGN_R1, DESIGN_R2, index, target_na)
    return BiconvexParams(d, DESIGN_R1, DESIGN_R2, t, index, front_diameter_um=DESIGN_FRONT_DIAMETER)


def to_prescription(
    p: BiconvexParams,
    wavelength_nm: float = HENE_WAVELENGTH_NM,
    rear_decenter_um: tuple[float, float] = (0.0, 0.0),
    rear_diameter_um: float | None = None,
) -> LensPrescription:
    """Front vertex at z=0, rear vertex at z=t, beam filling ``diameter_um``."""
    rear_d = p.diameter_um if rear_diameter_um is None else rear_diameter_um
    glass = Material("pdms", p.index)
    front = SphericalSurface(0.0, p.r1_um, p.front_aperture_um / 2, glass)
    rear = SphericalSurface(p.thickness_um, p.r2_um, rear_d / 2, AIR, decenter_um=rear_decenter_um)
    return LensPrescription(
        surfaces=(front, rear),
        ambient=AIR,
        wavelength_nm=wavelength_nm,
        entrance_beam_diameter_um=p.diameter_um,
    )


def equal_na_cap(diameter_um: float, target_na: float, index: float = DEFAULT_INDEX) -> BiconvexParams:
    """Single plano-convex cap with the given NA, convex side toward the light.

    The flat back sits on the chord plane, so thickness equals the cap sag.
    """
    radius = diameter_um * (index - 1) / (2 * target_na)
    sag = cap_sag(diameter_um, radius)
    return BiconvexParams(diameter_um, radius, None, sag, index)


def cap_params(diameter_um: float, sag_um: float, index: float = DEFAULT_INDEX) -> BiconvexParams:
    """Plano-convex lens built from a measured (D, h) cap."""
    return BiconvexParams(diameter_um, cap_radius(diameter_um, sag_um), None, sag_um, index)


def scaled(p: BiconvexParams, factor: float) -> BiconvexParams:
    return replace(
        p,
        diameter_um=p.diameter_um * factor,
        r1_um=p.r1_um * factor,
        r2_um=None if p.r2_um is None else p.r2_um * factor,
        thickness_um=p.thickness_um * factor,
        front_diameter_um=None if p.front_diameter_um is None else p.front_diameter_um * factor,
    )

