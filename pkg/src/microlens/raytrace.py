"""Exact sequential ray tracing through spherical and planar surfaces.

Rays always travel toward +z. The batch kernels work on ``(N, 3)`` arrays;
the single-ray functions :func:`intersect`, :func:`refract` and :func:`trace`
wrap them. Vignetted and totally internally reflected rays are flagged dead
and tallied, never raised.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .optics_core import LensPrescription, SphericalSurface
from .search import golden_section

PARAXIAL_FRACTION = 1e-3
DEFAULT_RINGS = 10
APERTURE_RTOL = 1e-12


class TraceError(RuntimeError):
    """No usable rays reached the image, or a focus could not be located."""


@dataclass(frozen=True)
class Ray:
    position: np.ndarray
    direction: np.ndarray
    opl_um: float = 0.0
    alive: bool = True
    wavelength_nm: float = 632.8


# -- batch kernels ------------------------------------------------------------

def _hit_sphere(P, D, vertex_z, radius, semi, cx=0.0, cy=0.0):
    """Ray-sphere hits; surface parameters may be scalars or per-ray arrays."""
    with np.errstate(invalid="ignore", divide="ignore"):
        C = np.empty_like(P)
        C[:, 0], C[:, 1], C[:, 2] = cx, cy, vertex_z + radius
        oc = P - C
        b = np.einsum("ij,ij->i", oc, D)
        c = np.einsum("ij,ij->i", oc, oc) - radius * radius
        disc = b * b - c
        # root on the vertex side of the sphere, written without cancellation
        t = c / (-b + np.sign(radius) * np.sqrt(disc))
        Q = P + t[:, None] * D
        N = (Q - C) / np.reshape(radius, (-1, 1))
        r = np.hypot(Q[:, 0] - cx, Q[:, 1] - cy)
        ok = (disc >= 0) & (t >= -1e-9) & (r <= semi * (1 + APERTURE_RTOL))
    return t, Q, N, ok


def _hit_plane(P, D, vertex_z, semi, cx=0.0, cy=0.0):
    with np.errstate(invalid="ignore", divide="ignore"):
        t = (vertex_z - P[:, 2]) / D[:, 2]
        Q = P + t[:, None] * D
        N = np.zeros_like(P)
        N[:, 2] = -1.0
        r = np.hypot(Q[:, 0] - cx, Q[:, 1] - cy)
        ok = np.isfinite(t) & (t >= -1e-9) & (r <= semi * (1 + APERTURE_RTOL))
    return t, Q, N, ok


def _intersect_batch(P: np.ndarray, D: np.ndarray, surf: SphericalSurface):
    """Distance along each ray to ``surf``, hit points, incident-side normals, hit mask."""
    dx, dy = surf.decenter_um
    if surf.radius_um is None:
        return _hit_plane(P, D, surf.vertex_z_um, surf.semi_aperture_um, dx, dy)
    return _hit_sphere(P, D, surf.vertex_z_um, surf.radius_um, surf.semi_aperture_um, dx, dy)


def _refract_batch(D: np.ndarray, N: np.ndarray, n_in: float, n_out: float):
    """Vector Snell's law. Returns new unit directions and a not-TIR mask."""
    cos_i = -np.einsum("ij,ij->i", N, D)
    flip = cos_i < 0
    N = np.where(flip[:, None], -N, N)
    cos_i = np.abs(cos_i)
    mu = n_in / n_out
    k = 1.0 - mu * mu * (1.0 - cos_i * cos_i)
    ok = k >= 0
    root = np.sqrt(np.where(ok, k, 0.0))
    out = mu * D + (mu * cos_i - root)[:, None] * N
    out /= np.linalg.norm(out, axis=1)[:, None]
    return out, ok


@dataclass
class Bundle:
    """Ray states after the last surface, plus optional per-surface history."""

    position: np.ndarray
    direction: np.ndarray
    opl: np.ndarray
    alive: np.ndarray
    history: list = field(default_factory=list)

    @property
    def n_dead(self) -> int:
        return int(np.count_nonzero(~self.alive))


def trace_bundle(prescription: LensPrescription, P: np.ndarray, D: np.ndarray,
                 opl: np.ndarray | None = None, record: bool = False) -> Bundle:
    P = np.array(P, dtype=float, copy=True).reshape(-1, 3)
    D = np.array(D, dtype=float, copy=True).reshape(-1, 3)
    opl = np.zeros(len(P)) if opl is None else np.array(opl, dtype=float, copy=True)
    alive = np.ones(len(P), dtype=bool)
    history = []
    n_in = prescription.ambient.refractive_index
    for surf in prescription.surfaces:
        n_out = surf.medium_after.refractive_index
        t, Q, N, hit = _intersect_batch(P, D, surf)
        alive &= hit
        newD, ok = _refract_batch(D, N, n_in, n_out)
        alive &= ok
        opl = np.where(alive, opl + n_in * t, opl)
        P = np.where(alive[:, None], Q, P)
        D = np.where(alive[:, None], newD, D)
        if record:
            history.append((P.copy(), D.copy(), opl.copy(), alive.copy()))
        n_in = n_out
    return Bundle(P, D, opl, alive, history)


def start_z(prescription: LensPrescription) -> float:
    first = prescription.surfaces[0]
    return first.vertex_z_um - first.semi_aperture_um - 1.0


def collimated_rays(prescription: LensPrescription, xy: np.ndarray):
    """Rays parallel to the axis entering at lateral positions ``xy`` (um)."""
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    P = np.column_stack([xy[:, 0], xy[:, 1], np.full(len(xy), start_z(prescription))])
    D = np.zeros_like(P)
    D[:, 2] = 1.0
    return P, D


def propagate_to_plane(bundle: Bundle, z: float, index: float):
    """Intersections with the plane ``z`` and the OPL at arrival."""
    P, D = bundle.position, bundle.direction
    with np.errstate(invalid="ignore", divide="ignore"):
        s = (z - P[:, 2]) / D[:, 2]
    return P + s[:, None] * D, bundle.opl + index * s


# -- single-ray API -----------------------------------------------------------

def intersect(ray: Ray, surface: SphericalSurface):
    """``(hit_point, normal)`` or ``None`` when the ray misses the clear aperture.

    The normal faces the incident side (opposes a +z-going ray).
    """
    if not ray.alive:
        return None
    _, Q, N, ok = _intersect_batch(ray.position[None, :], ray.direction[None, :], surface)
    if not ok[0]:
        return None
    return Q[0], N[0]


def refract(direction, normal, n_in: float, n_out: float):
    """Refracted unit direction, or ``None`` on total internal reflection."""
    d = np.asarray(direction, dtype=float)[None, :]
    nrm = np.asarray(normal, dtype=float)[None, :]
    out, ok = _refract_batch(d, nrm, n_in, n_out)
    return out[0] if ok[0] else None


def trace(prescription: LensPrescription, ray: Ray) -> list[Ray]:
    """State of ``ray`` after each surface. Dead rays keep their last live state."""
    b = trace_bundle(prescription, ray.position, ray.direction, [ray.opl_um], record=True)
    if not ray.alive:
        return [ray for _ in prescription.surfaces]
    return [
        Ray(P[0], D[0], float(opl[0]), bool(alive[0]), ray.wavelength_nm)
        for P, D, opl, alive in b.history
    ]


# -- pupil sampling -----------------------------------------------------------

def hexapolar_grid(rings: int = DEFAULT_RINGS) -> np.ndarray:
    """Normalized pupil points: the center plus 6k spokes on ring k."""
    pts = [(0.0, 0.0)]
    for k in range(1, rings + 1):
        r = k / rings
        ang = 2 * np.pi * np.arange(6 * k) / (6 * k)
        pts.extend(zip(r * np.cos(ang), r * np.sin(ang)))
    return np.array(pts)


# -- focus --------------------------------------------------------------------

def _axis_crossing(P: np.ndarray, D: np.ndarray) -> float:
    return float(P[2] - P[1] * D[2] / D[1])


def find_paraxial_focus(prescription: LensPrescription, z_range: tuple[float, float] | None = None,
                        fraction: float = PARAXIAL_FRACTION) -> float:
    """Axial crossing of a ray entering at ``fraction`` of the beam radius."""
    h = fraction * prescription.entrance_beam_diameter_um / 2
    P, D = collimated_rays(prescription, [(0.0, h)])
    b = trace_bundle(prescription, P, D)
    last = prescription.surfaces[-1].vertex_z_um
    lo, hi = z_range if z_range is not None else (last, last + 1e6)
    if not b.alive[0]:
        raise TraceError("near-axis ray was vignetted")
    p, d = b.position[0], b.direction[0]
    if d[1] * p[1] >= 0 or d[1] == 0:
        raise TraceError("near-axis ray does not converge toward the axis")
    z = _axis_crossing(p, d)
    if not lo <= z <= hi:
        raise TraceError(f"axis crossing at z={z:.6g} outside [{lo:.6g}, {hi:.6g}]")
    return z


@dataclass(frozen=True)
class SpotDiagram:
    image_z_um: float
    points: np.ndarray
    centroid: tuple[float, float]
    geo_radius_um: float
    rms_radius_um: float
    n_vignetted: int
    pupil: np.ndarray = field(repr=False, default=None)
    alive: np.ndarray = field(repr=False, default=None)


def _spot_stats(xy: np.ndarray):
    c = xy.mean(axis=0)
    r2 = np.sum((xy - c) ** 2, axis=1)
    return c, float(np.sqrt(r2.max())), float(np.sqrt(r2.mean()))


class _PupilTrace:
    """One traced pupil-filling bundle, re-used for any number of image planes."""

    def __init__(self, prescription: LensPrescription, rings: int = DEFAULT_RINGS):
        self.prescription = prescription
        self.pupil = hexapolar_grid(rings)
        P, D = collimated_rays(prescription, self.pupil * prescription.entrance_beam_diameter_um / 2)
        self.bundle = trace_bundle(prescription, P, D)
        if not self.bundle.alive.any():
            raise TraceError("every ray in the pupil grid was vignetted or reflected")
        live = self.bundle.alive
        self._P = self.bundle.position[live]
        self._D = self.bundle.direction[live]

    def xy_at(self, z: float) -> np.ndarray:
        s = (z - self._P[:, 2]) / self._D[:, 2]
        return self._P[:, :2] + s[:, None] * self._D[:, :2]

    def rms_at(self, z: float) -> float:
        xy = self.xy_at(z)
        return float(np.sqrt(np.mean(np.sum((xy - xy.mean(axis=0)) ** 2, axis=1))))

    def spot(self, z: float) -> SpotDiagram:
        xy = self.xy_at(z)
        c, geo, rms = _spot_stats(xy)
        return SpotDiagram(z, xy, (float(c[0]), float(c[1])), geo, rms,
                           self.bundle.n_dead, self.pupil, self.bundle.alive.copy())

    def default_bracket(self) -> tuple[float, float]:
        last = self.prescription.surfaces[-1].vertex_z_um
        z_par = find_paraxial_focus(self.prescription)
        span = z_par - last
        return max(last, z_par - span), z_par + span

    def best_focus(self, z_bracket=None, tol: float = 1e-3) -> float:
        lo, hi = z_bracket if z_bracket is not None else self.default_bracket()
        z, _ = golden_section(self.rms_at, lo, hi, tol)
        return z


def spot_diagram(prescription: LensPrescription, z_um: float, rings: int = DEFAULT_RINGS) -> SpotDiagram:
    return _PupilTrace(prescription, rings).spot(z_um)


def find_best_focus(prescription: LensPrescription, rings: int = DEFAULT_RINGS,
                    z_bracket: tuple[float, float] | None = None, tol: float = 1e-3) -> float:
    """Plane of minimum rms spot radius (golden-section search)."""
    return _PupilTrace(prescription, rings).best_focus(z_bracket, tol)


def best_focus_spot(prescription: LensPrescription, rings: int = DEFAULT_RINGS,
                    z_bracket=None, tol: float = 1e-3) -> SpotDiagram:
    pt = _PupilTrace(prescription, rings)
    return pt.spot(pt.best_focus(z_bracket, tol))


# -- fans ---------------------------------------------------------------------

@dataclass(frozen=True)
class FanCurve:
    pupil: np.ndarray
    values: np.ndarray
    kind: str  # "ray" (um) or "opd" (waves)
    reference_z_um: float

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.pupil.tolist(), self.values.tolist()))

    @property
    def peak(self) -> float:
        return float(np.nanmax(np.abs(self.values)))


def _fan_pupil(n_samples: int) -> np.ndarray:
    if n_samples < 3 or n_samples % 2 == 0:
        raise ValueError("fan needs an odd sample count >= 3")
    return np.linspace(-1.0, 1.0, n_samples)


def _meridional_bundle(prescription: LensPrescription, p: np.ndarray) -> Bundle:
    half = prescription.entrance_beam_diameter_um / 2
    P, D = collimated_rays(prescription, np.column_stack([np.zeros_like(p), p * half]))
    return trace_bundle(prescription, P, D)


def ray_fan(prescription: LensPrescription, n_samples: int = 21, z_um: float | None = None) -> FanCurve:
    """Meridional transverse aberration (um) at ``z_um`` (best focus by default)."""
    p = _fan_pupil(n_samples)
    z = find_best_focus(prescription) if z_um is None else z_um
    b = _meridional_bundle(prescription, p)
    Q, _ = propagate_to_plane(b, z, prescription.image_index)
    y = np.where(b.alive, Q[:, 1], np.nan)
    chief = y[n_samples // 2]
    return FanCurve(p, y - chief, "ray", z)


def exit_pupil_z(prescription: LensPrescription) -> float:
    """Image of the stop (first vertex) through the remaining surfaces."""
    surfs = prescription.surfaces
    if len(surfs) == 1:
        return surfs[0].vertex_z_um
    eps = 1e-6
    P = np.array([[0.0, 0.0, surfs[0].vertex_z_um]])
    D = np.array([[0.0, eps, np.sqrt(1 - eps * eps)]])
    rest = LensPrescription(surfs[1:], surfs[0].medium_after, prescription.wavelength_nm,
                            prescription.entrance_beam_diameter_um)
    b = trace_bundle(rest, P, D)
    d = b.direction[0]
    if abs(d[1]) < 1e-15:
        return float("inf")
    return _axis_crossing(b.position[0], d)


def _opl_to_reference_sphere(b: Bundle, center: np.ndarray, radius: float, index: float) -> np.ndarray:
    v = b.position - center
    bb = np.einsum("ij,ij->i", b.direction, v)
    cc = np.einsum("ij,ij->i", v, v) - radius * radius
    with np.errstate(invalid="ignore"):
        s = -bb - np.sqrt(bb * bb - cc)
    return b.opl + index * s


def opd_fan(prescription: LensPrescription, n_samples: int = 21, z_um: float | None = None) -> FanCurve:
    """Meridional optical path difference in waves.

    The reference sphere is centered on the chief-ray image point at ``z_um``
    (best focus by default) and passes through the exit-pupil center.
    """
    p = _fan_pupil(n_samples)
    z = find_best_focus(prescription) if z_um is None else z_um
    b = _meridional_bundle(prescription, p)
    Q, _ = propagate_to_plane(b, z, prescription.image_index)
    ic = n_samples // 2
    image_pt = Q[ic]
    z_exp = exit_pupil_z(prescription)
    radius = float(np.linalg.norm(image_pt - np.array([0.0, 0.0, z_exp])))
    opl = _opl_to_reference_sphere(b, image_pt, radius, prescription.image_index)
    opd = (opl - opl[ic]) / prescription.wavelength_um
    return FanCurve(p, np.where(b.alive, opd, np.nan), "opd", z)


# -- longitudinal / transverse spherical aberration ---------------------------

def spherical_aberration(prescription: LensPrescription, height_um: float,
                         z_paraxial: float | None = None) -> tuple[float, float]:
    """``(LA', TA')`` of a ray entering at ``height_um``; LA' < 0 when it focuses short."""
    half = prescription.entrance_beam_diameter_um / 2
    if not 0 < height_um <= half * (1 + 1e-12):
        raise ValueError(f"ray height {height_um} outside (0, {half}]")
    zp = find_paraxial_focus(prescription) if z_paraxial is None else z_paraxial
    P, D = collimated_rays(prescription, [(0.0, height_um)])
    b = trace_bundle(prescription, P, D)
    if not b.alive[0]:
        raise TraceError(f"ray at height {height_um} did not reach the image")
    p, d = b.position[0], b.direction[0]
    la = _axis_crossing(p, d) - zp
    ta = abs(p[1] + (zp - p[2]) * d[1] / d[2])
    return la, ta


def marginal_ray_na(prescription: LensPrescription, height_um: float | None = None) -> float:
    """Image-space n sin(U') of a collimated ray at ``height_um`` (beam edge by default)."""
    h = prescription.entrance_beam_diameter_um / 2 if height_um is None else height_um
    P, D = collimated_rays(prescription, [(0.0, h)])
    b = trace_bundle(prescription, P, D)
    if not b.alive[0]:
        raise TraceError("marginal ray did not reach the image")
    d = b.direction[0]
    return prescription.image_index * float(np.hypot(d[0], d[1]))


def paraxial_na_estimate(prescription: LensPrescription, fraction: float = 0.01) -> float:
    """Marginal-ray NA traced at a shrunken beam and scaled linearly to the full beam."""
    half = prescription.entrance_beam_diameter_um / 2
    return marginal_ray_na(prescription, fraction * half) / fraction
