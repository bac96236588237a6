"""Monte Carlo propagation of fabrication scatter to lens performance.

Each lens cap is perturbed in its measured quantities, sag h and diameter D,
and the curvature radius follows from the cap geometry. The substrate between
the two caps keeps its nominal thickness, so the vertex separation moves with
the two sags. The rear array is also shifted laterally by a 2-D normal
alignment error.

Sample ``i`` draws from its own generator, spawned from ``(seed, i)``, so the
result does not depend on how samples are split across workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import paraxial
from .optics_core import GeometryError, cap_radius, cap_sag, validate_prescription
from .raytrace import (
    DEFAULT_RINGS,
    _hit_sphere,
    _PupilTrace,
    _refract_batch,
    hexapolar_grid,
)
from .search import golden_section_batch

METRICS = ("na", "rms_spot_um", "geo_spot_um", "focus_shift_um")
CHUNK = 256

# Mean (D, h) of the reflowed resist caps, um.
RESIST_FRONT = (96.20, 20.40)
RESIST_REAR = (60.23, 13.40)


def as_fabricated(index: float = paraxial.DEFAULT_INDEX) -> paraxial.BiconvexParams:
    """The lens built from the measured mean resist caps.

    The substrate between the caps keeps its as-designed thickness.
    """
    design = paraxial.reference_design(index)
    d1, h1 = RESIST_FRONT
    d2, h2 = RESIST_REAR
    substrate = design.thickness_um - cap_sag(design.front_aperture_um, design.r1_um) \
        - cap_sag(design.diameter_um, abs(design.r2_um))
    return paraxial.BiconvexParams(d2, cap_radius(d1, h1), -cap_radius(d2, h2),
                                   substrate + h1 + h2, index, front_diameter_um=d1)


@dataclass(frozen=True)
class PerturbationSpec:
    # measured scatter of the reflowed resist caps, um
    sigma_h_front: float = 1.60
    sigma_D_front: float = 0.17
    sigma_h_rear: float = 0.75
    sigma_D_rear: float = 0.37
    sigma_decenter_um: float = 1.0
    n_samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        sig = (self.sigma_h_front, self.sigma_D_front, self.sigma_h_rear,
               self.sigma_D_rear, self.sigma_decenter_um)
        if any(s < 0 for s in sig):
            raise ValueError("standard deviations must be non-negative")
        if self.n_samples < 1:
            raise ValueError("need at least one sample")

    def scaled(self, factor: float) -> "PerturbationSpec":
        return replace(
            self,
            sigma_h_front=self.sigma_h_front * factor,
            sigma_D_front=self.sigma_D_front * factor,
            sigma_h_rear=self.sigma_h_rear * factor,
            sigma_D_rear=self.sigma_D_rear * factor,
            sigma_decenter_um=self.sigma_decenter_um * factor,
        )

    @classmethod
    def lens_array_diameters(cls, **kw) -> "PerturbationSpec":
        """Diameter scatter taken from the cast lens arrays instead of the resist."""
        return cls(sigma_D_front=0.36, sigma_D_rear=0.49, **kw)


@dataclass(frozen=True)
class MetricStats:
    mean: float
    std: float
    p5: float
    p50: float
    p95: float


@dataclass(frozen=True)
class ToleranceReport:
    metrics: dict[str, MetricStats]
    n_samples: int
    n_failed: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "n_failed": self.n_failed,
            "seed": self.seed,
            "metrics": {k: asdict(v) for k, v in self.metrics.items()},
        }


@dataclass
class MonteCarloSamples:
    """Per-sample draws and metrics, in sample order."""

    r1: np.ndarray
    r2: np.ndarray
    thickness: np.ndarray
    d_front: np.ndarray
    d_rear: np.ndarray
    decenter: np.ndarray
    na: np.ndarray
    rms_spot_um: np.ndarray
    geo_spot_um: np.ndarray
    focus_shift_um: np.ndarray
    failed: np.ndarray
    lost_rays: np.ndarray  # pupil rays vignetted or reflected, per sample

    def __len__(self):
        return len(self.na)


def _draws(seed: int, index: int) -> np.ndarray:
    ss = np.random.SeedSequence(seed, spawn_key=(index,))
    return np.random.default_rng(ss).standard_normal(6)


def _stats(values: np.ndarray) -> MetricStats:
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        nan = float("nan")
        return MetricStats(nan, nan, nan, nan, nan)
    if v[0] == v[-1]:
        mean, var = float(v[0]), 0.0
    else:
        mean = math.fsum(v) / v.size
        var = math.fsum((v - mean) ** 2) / (v.size - 1)
    p5, p50, p95 = np.percentile(v, [5, 50, 95])
    return MetricStats(mean, math.sqrt(var), float(p5), float(p50), float(p95))


def _best_focus_batch(r1, r2, t, d1, d2, dx, dy, index, rings, tol=1e-3):
    """Vectorized trace + golden-section best focus for S lenses sharing one pupil grid.

    Returns rms, geo radius, best-focus z (NaN where untraceable) and the
    number of lost rays per lens.
    """
    grid = hexapolar_grid(rings)
    S, G = len(r1), len(grid)
    rep = lambda a: np.repeat(np.asarray(a, dtype=float), G)  # noqa: E731
    P = np.zeros((S * G, 3))
    P[:, :2] = (grid[None, :, :] * (np.asarray(d2)[:, None, None] / 2)).reshape(-1, 2)
    P[:, 2] = -rep(d1) / 2 - 1.0
    D = np.zeros_like(P)
    D[:, 2] = 1.0

    _, Q, N, ok = _hit_sphere(P, D, 0.0, rep(r1), rep(d1) / 2)
    D, ok2 = _refract_batch(D, N, 1.0, index)
    alive = ok & ok2
    _, Q, N, ok = _hit_sphere(Q, D, rep(t), rep(r2), rep(d2) / 2, rep(dx), rep(dy))
    D, ok2 = _refract_batch(D, N, index, 1.0)
    alive &= ok & ok2

    Pz = Q[:, 2].reshape(S, G)
    Pxy = Q[:, :2].reshape(S, G, 2)
    Dxy = (D[:, :2] / D[:, 2:3]).reshape(S, G, 2)
    alive = alive.reshape(S, G)
    count = alive.sum(axis=1)

    def xy_at(z):
        xy = Pxy + ((z[:, None] - Pz)[..., None]) * Dxy
        return np.where(alive[..., None], xy, 0.0)

    def rms(z):
        xy = xy_at(z)
        with np.errstate(invalid="ignore", divide="ignore"):
            c = xy.sum(axis=1) / count[:, None]
            r2_ = np.where(alive, np.sum((xy - c[:, None, :]) ** 2, axis=2), 0.0)
            return np.sqrt(r2_.sum(axis=1) / count)

    p = paraxial.BiconvexParams
    z_par = np.array([
        t_i + paraxial.back_focal_length(p(d2_i, r1_i, r2_i, t_i, index))
        for r1_i, r2_i, t_i, d2_i in zip(r1, r2, t, d2)
    ])
    span = z_par - np.asarray(t)
    z, fz, edge = golden_section_batch(rms, np.asarray(t, dtype=float), z_par + span, tol)
    xy = xy_at(z)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = xy.sum(axis=1) / count[:, None]
        d = np.where(alive, np.sqrt(np.sum((xy - c[:, None, :]) ** 2, axis=2)), 0.0)
    geo = d.max(axis=1)
    bad = edge | (count == 0) | ~np.isfinite(fz)
    return (np.where(bad, np.nan, fz), np.where(bad, np.nan, geo), np.where(bad, np.nan, z), G - count)


def _nominal_caps(nominal: paraxial.BiconvexParams):
    d1, d2 = nominal.front_aperture_um, nominal.diameter_um
    return d1, cap_sag(d1, nominal.r1_um), d2, cap_sag(d2, abs(nominal.r2_um))


def _evaluate_chunk(nominal: paraxial.BiconvexParams, spec: PerturbationSpec,
                    indices: range, rings: int, z_ref: float):
    d1n, h1n, d2n, h2n = _nominal_caps(nominal)
    n = len(indices)
    out = {k: np.full(n, np.nan) for k in ("r1", "r2", "t", "d1", "d2", "dx", "dy", "na")}
    failed = np.zeros(n, dtype=bool)
    for j, i in enumerate(indices):
        g = _draws(spec.seed, i)
        h1 = h1n + spec.sigma_h_front * g[0]
        d1 = d1n + spec.sigma_D_front * g[1]
        h2 = h2n + spec.sigma_h_rear * g[2]
        d2 = d2n + spec.sigma_D_rear * g[3]
        dx, dy = spec.sigma_decenter_um * g[4], spec.sigma_decenter_um * g[5]
        try:
            r1, r2 = cap_radius(d1, h1), -cap_radius(d2, h2)
            t = nominal.thickness_um + (h1 - h1n) + (h2 - h2n)
            p = paraxial.BiconvexParams(d2, r1, r2, t, nominal.index, front_diameter_um=d1)
            if p.violations() or validate_prescription(paraxial.to_prescription(p)):
                raise GeometryError("perturbed lens is not realizable")
            na = paraxial.na_biconvex(p)
        except GeometryError:
            failed[j] = True
            continue
        for k, v in zip(("r1", "r2", "t", "d1", "d2", "dx", "dy", "na"), (r1, r2, t, d1, d2, dx, dy, na)):
            out[k][j] = v
    ok = ~failed
    rms = np.full(n, np.nan)
    geo = np.full(n, np.nan)
    zb = np.full(n, np.nan)
    lost = np.zeros(n, dtype=int)
    if ok.any():
        sel = {k: v[ok] for k, v in out.items()}
        rms[ok], geo[ok], zb[ok], lost[ok] = _best_focus_batch(
            sel["r1"], sel["r2"], sel["t"], sel["d1"], sel["d2"], sel["dx"], sel["dy"],
            nominal.index, rings)
    failed |= ~np.isfinite(rms)
    return out, rms, geo, zb - z_ref, failed, lost


def nominal_best_focus(nominal: paraxial.BiconvexParams, rings: int = DEFAULT_RINGS) -> float:
    d1, _, d2, _ = _nominal_caps(nominal)
    _, _, z, _ = _best_focus_batch([nominal.r1_um], [nominal.r2_um], [nominal.thickness_um],
                                [d1], [d2], [0.0], [0.0], nominal.index, rings)
    return float(z[0])


def sample_mc(nominal: paraxial.BiconvexParams, spec: PerturbationSpec,
              rings: int = DEFAULT_RINGS, workers: int = 1) -> MonteCarloSamples:
    if nominal.r2_um is None:
        raise GeometryError("tolerance model needs two curved surfaces")
    z_ref = nominal_best_focus(nominal, rings)
    chunks = [range(i, min(i + CHUNK, spec.n_samples)) for i in range(0, spec.n_samples, CHUNK)]
    args = [(nominal, spec, c, rings, z_ref) for c in chunks]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_evaluate_chunk, *zip(*args)))
    else:
        results = [_evaluate_chunk(*a) for a in args]
    cat = lambda key: np.concatenate([r[0][key] for r in results])  # noqa: E731
    return MonteCarloSamples(
        r1=cat("r1"), r2=cat("r2"), thickness=cat("t"), d_front=cat("d1"), d_rear=cat("d2"),
        decenter=np.column_stack([cat("dx"), cat("dy")]),
        na=cat("na"),
        rms_spot_um=np.concatenate([r[1] for r in results]),
        geo_spot_um=np.concatenate([r[2] for r in results]),
        focus_shift_um=np.concatenate([r[3] for r in results]),
        failed=np.concatenate([r[4] for r in results]),
        lost_rays=np.concatenate([r[5] for r in results]),
    )


def summarize(samples: MonteCarloSamples, seed: int = 0) -> ToleranceReport:
    ok = ~samples.failed
    metrics = {name: _stats(getattr(samples, name)[ok]) for name in METRICS}
    return ToleranceReport(metrics, len(samples), int(np.count_nonzero(samples.failed)), seed)


def run_mc(nominal: paraxial.BiconvexParams, spec: PerturbationSpec,
           rings: int = DEFAULT_RINGS, workers: int = 1) -> ToleranceReport:
    return summarize(sample_mc(nominal, spec, rings, workers), spec.seed)


def decenter_sensitivity(nominal: paraxial.BiconvexParams, dx_um: float,
                         rings: int = DEFAULT_RINGS) -> float:
    """Growth of the best-focus rms spot radius when the rear cap shifts by ``dx_um``."""
    def rms(shift):
        pt = _PupilTrace(paraxial.to_prescription(nominal, rear_decenter_um=(shift, 0.0)), rings)
        return pt.rms_at(pt.best_focus())

    return rms(dx_um) - rms(0.0)
