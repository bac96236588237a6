import dataclasses

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.optimize import brentq

from microlens import paraxial
from microlens.optics_core import GeometryError, cap_sag

# y-nu matrix trace at 40 digits (see notes/oracles.py)
DESIGN_T = 70.97305002704164
DESIGN_EFL = 79.15567282321900
DESIGN_BFL = 57.95988269503921


def test_design_thickness_matches_root_finder(design):
    f = lambda t: paraxial.na_biconvex(dataclasses.replace(design, thickness_um=t)) - 0.379  # noqa: E731
    assert design.thickness_um == pytest.approx(brentq(f, 1.0, 300.0, xtol=1e-14), rel=1e-12)
    assert design.thickness_um == pytest.approx(DESIGN_T, rel=1e-12)


def test_design_focal_lengths(design):
    assert paraxial.effective_focal_length(design) == pytest.approx(DESIGN_EFL, rel=1e-12)
    assert paraxial.back_focal_length(design) == pytest.approx(DESIGN_BFL, rel=1e-12)


def test_design_na():
    p = paraxial.BiconvexParams(60.0, 79.7, -43.5, 71.0, 1.43)
    assert paraxial.na_biconvex(p) == pytest.approx(0.378969847, abs=1e-9)


def test_sag_ratios_of_the_design():
    assert cap_sag(97.6, 79.7) / 97.6 == pytest.approx(0.17, abs=0.005)
    assert cap_sag(60.0, 43.5) / 60.0 == pytest.approx(0.20, abs=0.005)


def test_hemisphere_na_at_index_1p5():
    assert paraxial.na_single(40.0, 20.0, 1.5) == pytest.approx(0.5)


def test_spot_size_design():
    p = paraxial.BiconvexParams(60.0, 79.7, -43.5, 71.0, 1.43)
    assert paraxial.diffraction_spot(p, 0.6328) == pytest.approx(0.82 * 0.6328 / 0.378969847, rel=1e-8)


@st.composite
def lenses(draw):
    d = draw(st.floats(10.0, 200.0))
    r1 = draw(st.floats(d / 2 * 1.01, 1000.0))
    r2 = -draw(st.floats(d / 2 * 1.01, 1000.0))
    t = draw(st.floats(0.0, 300.0))
    n = draw(st.floats(1.3, 1.8))
    return paraxial.BiconvexParams(d, r1, r2, t, n)


@given(lenses(), st.floats(0.3, 1.6))
def test_spot_times_na_is_constant(p, lam):
    assume(paraxial.na_biconvex(p) > 1e-6)
    got = paraxial.diffraction_spot(p, lam) * paraxial.na_biconvex(p)
    assert got == pytest.approx(0.82 * lam, rel=1e-12)


@given(st.floats(5.0, 300.0), st.floats(0.01, 1.0), st.floats(1.2, 2.0))
def test_thick_formula_reduces_to_single_cap(d, frac, n):
    h = frac * d / 2
    p = paraxial.BiconvexParams(d, paraxial.cap_radius(d, h), None, 0.0, n)
    assert paraxial.na_biconvex(p) == pytest.approx(paraxial.na_single(d, h, n), rel=1e-9)


@given(st.floats(20.0, 100.0), st.floats(0.05, 0.42))  # hemisphere caps out at n - 1
def test_equal_na_cap_hits_target(d, na):
    cap = paraxial.equal_na_cap(d, na, 1.43)
    assert paraxial.na_biconvex(cap) == pytest.approx(na, rel=1e-12)
    assert cap.thickness_um == pytest.approx(cap_sag(d, cap.r1_um))


def test_equal_na_cap_radius():
    assert paraxial.equal_na_cap(60.0, 0.379).r1_um == pytest.approx(34.03693931398417, rel=1e-13)


@given(lenses(), st.floats(0.1, 10.0))
def test_scaling_keeps_na(p, k):
    assert paraxial.na_biconvex(paraxial.scaled(p, k)) == pytest.approx(paraxial.na_biconvex(p), rel=1e-10)


def test_negative_thickness_target_rejected():
    with pytest.raises(GeometryError):
        paraxial.solve_thickness(60.0, 79.7, -43.5, 1.43, 0.9)


def test_front_diameter_reading_thicker():
    alt = paraxial.reference_design(use_front_diameter=True)
    assert alt.diameter_um == 97.6
    assert paraxial.na_biconvex(alt) == pytest.approx(0.379)
    assert alt.thickness_um > DESIGN_T


def test_edge_thickness_check():
    thin = paraxial.BiconvexParams(60.0, 79.7, -43.5, 5.0, 1.43, front_diameter_um=97.6)
    assert thin.edge_thickness_um() < 0
    assert thin.violations()


def test_prescription_layout(design):
    rx = paraxial.to_prescription(design, rear_decenter_um=(1.0, 0.0))
    front, rear = rx.surfaces
    assert front.vertex_z_um == 0.0 and rear.vertex_z_um == pytest.approx(DESIGN_T)
    assert front.semi_aperture_um == pytest.approx(48.8)
    assert rear.semi_aperture_um == 30.0 and rear.decenter_um == (1.0, 0.0)
    assert rx.entrance_beam_diameter_um == 60.0
    assert rx.indices() == [1.0, 1.43, 1.0]


def test_default_index_is_overridable():
    assert paraxial.reference_design(1.5).index == 1.5
    assert paraxial.reference_design(1.5).thickness_um != paraxial.reference_design().thickness_um


@given(lenses(), st.floats(1.01, 3.0))
def test_na_decreases_with_flatter_surfaces(p, k):
    # each surface's internal focus must lie beyond the other vertex
    assume(p.thickness_um < p.index * min(p.r1_um, -p.r2_um) / (p.index - 1))
    assume(paraxial.na_biconvex(p) > 0)
    flatter_front = dataclasses.replace(p, r1_um=p.r1_um * k)
    flatter_rear = dataclasses.replace(p, r2_um=p.r2_um * k)
    assert paraxial.na_biconvex(flatter_front) < paraxial.na_biconvex(p)
    assert paraxial.na_biconvex(flatter_rear) < paraxial.na_biconvex(p)
