"""Spot-size optimization of the two-surface lens at a fixed NA.

Variables are the front radius, the magnitude of the rear radius and the
vertex thickness. The aperture is held fixed. The NA target enters as a
quadratic penalty on top of the best-focus rms spot radius.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import paraxial
from .optics_core import GeometryError, validate_prescription
from .raytrace import DEFAULT_RINGS, TraceError, _PupilTrace
from .search import BracketError

# 0.01 NA of error costs 10 um of rms spot radius.
NA_WEIGHT = 1e5


@dataclass(frozen=True)
class DesignSpec:
    target_na: float = paraxial.DESIGN_NA
    diameter_um: float = paraxial.DESIGN_REAR_DIAMETER
    index: float = paraxial.DEFAULT_INDEX
    bounds: tuple[tuple[float, float], ...] = ((48.8, 200.0), (30.0, 200.0), (1.0, 300.0))
    wavelength_nm: float = paraxial.HENE_WAVELENGTH_NM
    front_diameter_um: float | None = paraxial.DESIGN_FRONT_DIAMETER
    na_weight: float = NA_WEIGHT
    na_tolerance: float = 0.005
    rings: int = DEFAULT_RINGS

    def __post_init__(self):
        if not 0 < self.target_na <= self.index - 1:
            raise ValueError(f"target NA {self.target_na} outside (0, n-1]")
        if len(self.bounds) != 3 or any(lo > hi for lo, hi in self.bounds):
            raise ValueError("bounds need three (min, max) pairs with min <= max")

    def params(self, x) -> paraxial.BiconvexParams:
        r1, r2_abs, t = (float(v) for v in x)
        return paraxial.BiconvexParams(self.diameter_um, r1, -r2_abs, t, self.index,
                                       front_diameter_um=self.front_diameter_um)

    def clip(self, x) -> np.ndarray:
        lo, hi = np.array(self.bounds).T
        return np.clip(np.asarray(x, dtype=float), lo, hi)


@dataclass(frozen=True)
class DesignResult:
    r1_um: float
    r2_um: float
    t_um: float
    achieved_na: float
    merit_um: float
    iterations: int
    converged: bool
    n_evaluations: int = 0
    start: tuple[float, float, float] = field(default=(0.0, 0.0, 0.0))

    @property
    def x(self) -> np.ndarray:
        return np.array([self.r1_um, -self.r2_um, self.t_um])

    def params(self, spec: DesignSpec) -> paraxial.BiconvexParams:
        return spec.params(self.x)


def spot_rms(p: paraxial.BiconvexParams, wavelength_nm: float = paraxial.HENE_WAVELENGTH_NM,
             rings: int = DEFAULT_RINGS) -> float:
    """Best-focus rms spot radius, or ``inf`` if the lens cannot be evaluated."""
    pr = paraxial.to_prescription(p, wavelength_nm)
    if validate_prescription(pr):
        return math.inf
    try:
        pt = _PupilTrace(pr, rings)
        if pt.bundle.n_dead:
            return math.inf
        return pt.rms_at(pt.best_focus())
    except (TraceError, BracketError, GeometryError):
        return math.inf


def merit(candidate, spec: DesignSpec) -> float:
    """rms spot radius at best focus (um) plus the NA penalty."""
    x = np.asarray(candidate, dtype=float)
    if not np.all(np.isfinite(x)):
        return math.inf
    p = spec.params(x)
    if p.violations():
        return math.inf
    try:
        na = paraxial.na_biconvex(p)
    except GeometryError:
        return math.inf
    return spot_rms(p, spec.wavelength_nm, spec.rings) + spec.na_weight * (na - spec.target_na) ** 2


def design_start(spec: DesignSpec) -> np.ndarray:
    t = paraxial.solve_thickness(spec.diameter_um, paraxial.DESIGN_R1, paraxial.DESIGN_R2,
                                 spec.index, spec.target_na)
    return np.array([paraxial.DESIGN_R1, -paraxial.DESIGN_R2, t])


def _run(spec: DesignSpec, start: np.ndarray, max_iter: int, xatol: float) -> DesignResult:
    x0 = spec.clip(start)
    lo, hi = np.array(spec.bounds).T
    f0 = merit(x0, spec)
    if np.all(lo == hi):
        p = spec.params(x0)
        return DesignResult(p.r1_um, p.r2_um, p.thickness_um, paraxial.na_biconvex(p),
                            f0, 0, True, 1, tuple(x0))
    res = minimize(
        merit, x0, args=(spec,), method="Nelder-Mead", bounds=list(spec.bounds),
        options={"xatol": xatol, "fatol": math.inf, "maxiter": max_iter, "adaptive": False},
    )
    x = spec.clip(res.x)
    fx = merit(x, spec)
    if not fx <= f0:
        x, fx = x0, f0
    p = spec.params(x)
    return DesignResult(p.r1_um, p.r2_um, p.thickness_um, paraxial.na_biconvex(p), fx,
                        int(res.nit), bool(res.success), int(res.nfev), tuple(float(v) for v in x0))


def _random_start(spec: DesignSpec, rng: np.random.Generator, tries: int = 200) -> np.ndarray:
    """Uniform (R1, |R2|) in bounds with the thickness placed on the NA target when possible."""
    (r1lo, r1hi), (r2lo, r2hi), (tlo, thi) = spec.bounds
    x = None
    for _ in range(tries):
        r1, r2 = rng.uniform(r1lo, r1hi), rng.uniform(r2lo, r2hi)
        try:
            t = paraxial.solve_thickness(spec.diameter_um, r1, -r2, spec.index, spec.target_na)
        except GeometryError:
            t = rng.uniform(tlo, thi)
        x = spec.clip([r1, r2, t])
        if math.isfinite(merit(x, spec)):
            return x
    return x


def optimize(spec: DesignSpec, start=None, seed: int = 0, n_starts: int | None = None,
             max_iter: int = 500, xatol: float = 1e-3) -> DesignResult:
    """Nelder-Mead over (R1, |R2|, t) with bound clipping.

    With ``start`` and no ``n_starts`` a single run is made. Otherwise
    ``n_starts`` runs (default 8) are made; when ``start`` is given it is the
    first of them and the rest are seeded uniform draws. The lowest merit
    wins, ties going to the earliest start.
    """
    rng = np.random.default_rng(seed)
    if n_starts is None:
        n_starts = 1 if start is not None else 8
    starts = [] if start is None else [np.asarray(start, dtype=float)]
    while len(starts) < n_starts:
        starts.append(_random_start(spec, rng))
    best = None
    for s in starts:
        r = _run(spec, s, max_iter, xatol)
        if best is None or r.merit_um < best.merit_um:
            best = r
    return best
