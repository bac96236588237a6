"""Geometric primitives shared by the rest of the package.

All lengths are micrometers. Wavelengths are carried in nanometers on the
prescription and converted with :func:`LensPrescription.wavelength_um`.

Signed radius convention: a positive radius puts the center of curvature
downstream of the vertex (light travels toward +z). Planar surfaces carry
``radius_um=None`` instead of a large sentinel radius.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path


class GeometryError(ValueError):
    """Raised when a cap or surface cannot exist with the given dimensions."""


def cap_sag(diameter_um: float, radius_um: float) -> float:
    """Height of a spherical cap with chord ``diameter_um`` on a sphere of ``radius_um``."""
    if radius_um <= 0 or diameter_um < 0:
        raise GeometryError(f"need diameter >= 0 and radius > 0, got D={diameter_um}, R={radius_um}")
    if diameter_um > 2 * radius_um:
        raise GeometryError(f"chord {diameter_um} um exceeds sphere diameter {2 * radius_um} um")
    half = diameter_um / 2
    # R - sqrt(R^2 - a^2) rewritten to avoid cancellation for shallow caps
    return half * half / (radius_um + math.sqrt(radius_um * radius_um - half * half))


def cap_radius(diameter_um: float, sag_um: float) -> float:
    """Curvature radius of the cap with chord ``diameter_um`` and height ``sag_um``."""
    if diameter_um <= 0 or sag_um <= 0:
        raise GeometryError(f"need positive diameter and sag, got D={diameter_um}, h={sag_um}")
    return (diameter_um ** 2 + 4 * sag_um ** 2) / (8 * sag_um)


@dataclass(frozen=True)
class CapGeometry:
    diameter_um: float
    sag_um: float
    radius_um: float

    @classmethod
    def from_diameter_sag(cls, diameter_um: float, sag_um: float) -> "CapGeometry":
        return cls(diameter_um, sag_um, cap_radius(diameter_um, sag_um))

    @classmethod
    def from_diameter_radius(cls, diameter_um: float, radius_um: float) -> "CapGeometry":
        return cls(diameter_um, cap_sag(diameter_um, radius_um), radius_um)

    @property
    def sag_ratio(self) -> float:
        return self.sag_um / self.diameter_um

    @property
    def volume_um3(self) -> float:
        a = self.diameter_um / 2
        return math.pi * self.sag_um / 6 * (3 * a * a + self.sag_um ** 2)

    def is_consistent(self, rtol: float = 1e-9) -> bool:
        if not (0 < self.sag_um <= self.radius_um and 0 < self.diameter_um <= 2 * self.radius_um):
            return False
        expected = cap_radius(self.diameter_um, self.sag_um)
        return math.isclose(self.radius_um, expected, rel_tol=rtol)


@dataclass(frozen=True)
class Material:
    name: str
    refractive_index: float

    def __post_init__(self):
        if self.refractive_index < 1.0:
            raise GeometryError(f"refractive index {self.refractive_index} < 1 for {self.name!r}")


AIR = Material("air", 1.0)


@dataclass(frozen=True)
class SphericalSurface:
    """One refracting interface.

    ``decenter_um`` is a lateral (x, y) shift of the surface axis, used for
    assembly-misalignment studies. Centered systems leave it at zero.
    """

    vertex_z_um: float
    radius_um: float | None
    semi_aperture_um: float
    medium_after: Material
    decenter_um: tuple[float, float] = (0.0, 0.0)

    @property
    def is_planar(self) -> bool:
        return self.radius_um is None

    @property
    def curvature(self) -> float:
        return 0.0 if self.radius_um is None else 1.0 / self.radius_um


@dataclass(frozen=True)
class LensPrescription:
    surfaces: tuple[SphericalSurface, ...]
    ambient: Material = AIR
    wavelength_nm: float = 632.8
    entrance_beam_diameter_um: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "surfaces", tuple(self.surfaces))

    @property
    def wavelength_um(self) -> float:
        return self.wavelength_nm * 1e-3

    @property
    def image_index(self) -> float:
        return self.surfaces[-1].medium_after.refractive_index if self.surfaces else self.ambient.refractive_index

    def indices(self) -> list[float]:
        """Refractive index before each surface, then the image-space index."""
        return [self.ambient.refractive_index] + [s.medium_after.refractive_index for s in self.surfaces]


@dataclass(frozen=True)
class Violation:
    surface: int | None
    rule: str
    message: str

    def __str__(self):
        where = "prescription" if self.surface is None else f"surface {self.surface}"
        return f"{where}: {self.rule}: {self.message}"


def validate_prescription(p: LensPrescription) -> list[Violation]:
    """Check every type invariant; an empty list means the prescription is usable."""
    out: list[Violation] = []
    if not p.surfaces:
        out.append(Violation(None, "empty", "prescription has no surfaces"))
    if p.wavelength_nm <= 0:
        out.append(Violation(None, "wavelength", f"wavelength {p.wavelength_nm} nm is not positive"))
    if p.entrance_beam_diameter_um <= 0:
        out.append(Violation(None, "beam", "entrance beam diameter must be positive"))
    for i, s in enumerate(p.surfaces):
        if s.semi_aperture_um <= 0:
            out.append(Violation(i, "aperture", f"semi-aperture {s.semi_aperture_um} must be positive"))
        if s.radius_um is not None:
            if s.radius_um == 0 or not math.isfinite(s.radius_um):
                out.append(Violation(i, "radius", f"radius {s.radius_um} is not a finite non-zero value"))
            elif s.semi_aperture_um > abs(s.radius_um):
                out.append(Violation(
                    i, "aperture",
                    f"semi-aperture {s.semi_aperture_um} exceeds |radius| {abs(s.radius_um)}"))
        if i > 0 and not s.vertex_z_um > p.surfaces[i - 1].vertex_z_um:
            out.append(Violation(
                i, "ordering",
                f"vertex z {s.vertex_z_um} not after previous vertex {p.surfaces[i - 1].vertex_z_um}"))
    if p.surfaces and p.entrance_beam_diameter_um > 0:
        limit = 2 * min(s.semi_aperture_um for s in p.surfaces)
        if p.entrance_beam_diameter_um > limit * (1 + 1e-12):
            out.append(Violation(
                None, "beam",
                f"entrance beam {p.entrance_beam_diameter_um} exceeds limiting aperture {limit}"))
    return out


# -- prescription file ------------------------------------------------------

def prescription_to_dict(p: LensPrescription) -> dict:
    return {
        "wavelength_nm": p.wavelength_nm,
        "entrance_beam_diameter_um": p.entrance_beam_diameter_um,
        "ambient_index": p.ambient.refractive_index,
        "surfaces": [
            {
                "vertex_z_um": s.vertex_z_um,
                "radius_um": s.radius_um,
                "semi_aperture_um": s.semi_aperture_um,
                "index_after": s.medium_after.refractive_index,
                **({"decenter_um": list(s.decenter_um)} if any(s.decenter_um) else {}),
            }
            for s in p.surfaces
        ],
    }


def prescription_from_dict(d: dict) -> LensPrescription:
    try:
        surfaces = [
            SphericalSurface(
                vertex_z_um=float(s["vertex_z_um"]),
                radius_um=None if s.get("radius_um") is None else float(s["radius_um"]),
                semi_aperture_um=float(s["semi_aperture_um"]),
                medium_after=Material(s.get("material", "medium"), float(s["index_after"])),
                decenter_um=tuple(float(v) for v in s.get("decenter_um", (0.0, 0.0))),
            )
            for s in d["surfaces"]
        ]
        return LensPrescription(
            surfaces=tuple(surfaces),
            ambient=Material("ambient", float(d.get("ambient_index", 1.0))),
            wavelength_nm=float(d["wavelength_nm"]),
            entrance_beam_diameter_um=float(d["entrance_beam_diameter_um"]),
        )
    except (KeyError, TypeError) as exc:
        raise GeometryError(f"malformed prescription: missing or bad field {exc}") from exc


def load_prescription(path: str | Path) -> LensPrescription:
    with open(path) as fh:
        return prescription_from_dict(json.load(fh))


def save_prescription(p: LensPrescription, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(prescription_to_dict(p), fh, indent=2)
        fh.write("\n")
