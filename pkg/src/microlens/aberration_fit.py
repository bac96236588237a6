"""Transverse ray-aberration power series: evaluation and least-squares fitting.

The series is kept exactly as printed in the source, including the odd
``A1 sin(theta)`` first x-term (no pupil factor). Pass ``symmetric_a1=True``
to use ``A1 s sin(theta)`` instead.

Pupil azimuth ``theta`` is measured from the y axis, so a pupil point sits at
``(s sin(theta), s cos(theta))``. ``s`` is normalized by the beam radius and
``h`` by the maximum field height; coefficients are in micrometers.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

COEFF_NAMES = (
    ["A1", "A2"]
    + [f"B{i}" for i in range(1, 6)]
    + [f"C{i}" for i in range(1, 13)]
)
_ORDER3 = COEFF_NAMES[:7]
# Columns that vanish identically when every sample is on axis (h == 0).
_FIELD_TERMS = {"B2", "B3", "B4", "B5", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9", "C10", "C11", "C12"}
COND_LIMIT = 1e10


class RankDeficiencyError(np.linalg.LinAlgError):
    """The sample set cannot determine the requested coefficients."""


@dataclass(frozen=True)
class AberrationCoefficients:
    a: tuple[float, float] = (0.0, 0.0)
    b: tuple[float, ...] = (0.0,) * 5
    c: tuple[float, ...] = (0.0,) * 12

    def as_vector(self) -> np.ndarray:
        return np.array([*self.a, *self.b, *self.c], dtype=float)

    @classmethod
    def from_vector(cls, v) -> "AberrationCoefficients":
        v = [float(x) for x in v]
        return cls(tuple(v[:2]), tuple(v[2:7]), tuple(v[7:19]))

    @classmethod
    def from_mapping(cls, **named: float) -> "AberrationCoefficients":
        v = np.zeros(len(COEFF_NAMES))
        for k, val in named.items():
            v[COEFF_NAMES.index(k)] = val
        return cls.from_vector(v)

    def __getitem__(self, name: str) -> float:
        return float(self.as_vector()[COEFF_NAMES.index(name)])


@dataclass(frozen=True)
class RaySample:
    s: float
    h: float
    theta: float
    x_um: float
    y_um: float

    def __post_init__(self):
        if not 0 <= self.s <= 1:
            raise ValueError(f"normalized pupil radius {self.s} outside [0, 1]")


@dataclass(frozen=True)
class FitResult:
    coefficients: AberrationCoefficients
    residual_rms_um: float
    order: int
    identifiable: dict[str, bool] = field(default_factory=dict)
    symmetric_a1: bool = False

    def to_dict(self) -> dict:
        return {
            "A": list(self.coefficients.a),
            "B": list(self.coefficients.b),
            "C": list(self.coefficients.c),
            "residual_rms_um": self.residual_rms_um,
            "order": self.order,
            "identifiable": [name for name in COEFF_NAMES if self.identifiable.get(name, False)],
        }


def _basis(s, h, theta, symmetric_a1: bool = False):
    """Per-coefficient (x', y') basis functions, each an array like ``s``."""
    s, h, theta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s, h, theta)))
    st, ct = np.sin(theta), np.cos(theta)
    s2t, c2t = np.sin(2 * theta), np.cos(2 * theta)
    cc = ct * ct
    z = np.zeros_like(s)
    return {
        "A1": (s * st if symmetric_a1 else st, z),
        "A2": (z, s * ct + h),
        "B1": (s ** 3 * st, s ** 3 * ct),
        "B2": (s ** 2 * h * s2t, s ** 2 * h * (2 + c2t)),
        "B3": (s * h ** 2 * st, 3 * s * h ** 2 * ct),
        "B4": (s * h ** 2 * st, s * h ** 2 * ct),
        "B5": (z, h ** 3),
        "C1": (s ** 5 * st, s ** 5 * ct),
        "C2": (z, s ** 4 * h),
        "C3": (s ** 4 * h * s2t, s ** 4 * h * c2t),
        "C4": (z, s ** 3 * h ** 2 * ct),
        "C5": (s ** 2 * h ** 2 * st, z),
        "C6": (cc * s ** 2 * h ** 2 * st, cc * s ** 3 * h ** 2 * ct),
        "C7": (z, s ** 2 * h ** 3),
        "C8": (z, s ** 2 * h ** 3 * c2t),
        "C9": (s ** 2 * h ** 3 * s2t, z),
        "C10": (z, s * h ** 4 * ct),
        "C11": (h ** 4 * st, z),
        "C12": (z, h ** 5),
    }


def eval_expansion(coeffs: AberrationCoefficients, s, h, theta, symmetric_a1: bool = False):
    """Image displacement ``(x', y')`` in um for pupil (s, theta) and field h."""
    basis = _basis(s, h, theta, symmetric_a1)
    v = coeffs.as_vector()
    x = sum(v[i] * basis[name][0] for i, name in enumerate(COEFF_NAMES))
    y = sum(v[i] * basis[name][1] for i, name in enumerate(COEFF_NAMES))
    return x, y


def _solve(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Column-scaled normal equations, falling back to SVD when ill-conditioned."""
    scale = np.linalg.norm(A, axis=0)
    As = A / scale
    G = As.T @ As
    if np.linalg.cond(G) <= COND_LIMIT:
        x = np.linalg.solve(G, As.T @ rhs)
        # one refinement step recovers the accuracy squared away by the normal form
        x += np.linalg.solve(G, As.T @ (rhs - As @ x))
    else:
        x, _, rank, _ = np.linalg.lstsq(As, rhs, rcond=None)
        if rank < As.shape[1]:
            raise RankDeficiencyError(f"design matrix rank {rank} < {As.shape[1]} columns")
    return x / scale


def fit_expansion(samples, order: int = 3, symmetric_a1: bool = False) -> FitResult:
    """Joint least-squares fit of the x' and y' series to traced ray samples.

    ``order=3`` fits the A and B groups with every C frozen at zero. When all
    samples are on axis the field-dependent terms cannot be determined; they
    are reported as zero and flagged non-identifiable.
    """
    if order not in (3, 5):
        raise ValueError("order must be 3 or 5")
    s = np.array([r.s for r in samples], dtype=float)
    h = np.array([r.h for r in samples], dtype=float)
    th = np.array([r.theta for r in samples], dtype=float)
    xs = np.array([r.x_um for r in samples], dtype=float)
    ys = np.array([r.y_um for r in samples], dtype=float)

    names = list(_ORDER3 if order == 3 else COEFF_NAMES)
    on_axis = bool(np.all(h == 0))
    if on_axis:
        names = [n for n in names if n not in _FIELD_TERMS]
    if len(samples) * 2 < 3 * len(names) or len(samples) < 3:
        raise RankDeficiencyError(f"{len(samples)} samples too few for {len(names)} coefficients")

    basis = _basis(s, h, th, symmetric_a1)
    A = np.vstack([np.concatenate([basis[n][0], basis[n][1]]) for n in names]).T
    rhs = np.concatenate([xs, ys])
    if np.any(np.linalg.norm(A, axis=0) == 0):
        dead = [n for n, col in zip(names, A.T) if not np.any(col)]
        raise RankDeficiencyError(f"samples carry no information on {', '.join(dead)}")
    sol = _solve(A, rhs)

    full = np.zeros(len(COEFF_NAMES))
    for n, val in zip(names, sol):
        full[COEFF_NAMES.index(n)] = val
    resid = rhs - A @ sol
    rms = float(np.sqrt(np.mean(resid ** 2)))
    identifiable = {n: n in names for n in COEFF_NAMES}
    return FitResult(AberrationCoefficients.from_vector(full), rms, order, identifiable, symmetric_a1)


def samples_from_spot(pupil: np.ndarray, image_xy: np.ndarray, alive=None,
                      reference=(0.0, 0.0)) -> list[RaySample]:
    """On-axis samples from normalized pupil coordinates and image intersections."""
    pupil = np.asarray(pupil, dtype=float)
    image_xy = np.asarray(image_xy, dtype=float)
    keep = np.ones(len(pupil), bool) if alive is None else np.asarray(alive, bool)
    out = []
    for (px, py), (x, y), k in zip(pupil, image_xy, keep):
        if not k:
            continue
        r = float(np.hypot(px, py))
        out.append(RaySample(min(r, 1.0), 0.0, float(np.arctan2(px, py)),
                             float(x - reference[0]), float(y - reference[1])))
    return out
