"""Design and analysis tools for bi-convex reflowed-polymer micro lenses."""
from .optics_core import (
    AIR,
    CapGeometry,
    GeometryError,
    LensPrescription,
    Material,
    SphericalSurface,
    cap_radius,
    cap_sag,
    load_prescription,
    save_prescription,
    validate_prescription,
)
from .paraxial import BiconvexParams, diffraction_spot, na_biconvex, na_single

__all__ = [
    "AIR",
    "BiconvexParams",
    "CapGeometry",
    "GeometryError",
    "LensPrescription",
    "Material",
    "SphericalSurface",
    "cap_radius",
    "cap_sag",
    "diffraction_spot",
    "load_prescription",
    "na_biconvex",
    "na_single",
    "save_prescription",
    "validate_prescription",
]

__version__ = "0.1.0"
