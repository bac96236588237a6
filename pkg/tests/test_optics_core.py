import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from microlens.optics_core import (
    AIR,
    CapGeometry,
    GeometryError,
    LensPrescription,
    Material,
    SphericalSurface,
    cap_radius,
    cap_sag,
    load_prescription,
    prescription_from_dict,
    prescription_to_dict,
    save_prescription,
    validate_prescription,
)

GLASS = Material("pdms", 1.43)


def _lens(**over):
    front = SphericalSurface(0.0, 79.7, 48.8, GLASS)
    rear = SphericalSurface(71.0, -43.5, 30.0, AIR)
    kw = dict(surfaces=(front, rear), entrance_beam_diameter_um=60.0)
    kw.update(over)
    return LensPrescription(**kw)


def test_hemisphere_sag_equals_radius():
    assert cap_sag(20.0, 10.0) == pytest.approx(10.0)
    assert cap_radius(20.0, 10.0) == pytest.approx(10.0)


def test_measured_caps():
    # (D^2 + 4h^2) / 8h evaluated in 40-digit arithmetic
    assert cap_radius(96.20, 20.40) == pytest.approx(66.90612745098039, rel=1e-14)
    assert cap_radius(60.23, 13.40) == pytest.approx(40.54004570895522, rel=1e-14)


def test_zero_chord_has_zero_sag():
    assert cap_sag(0.0, 5.0) == 0.0


def test_chord_wider_than_sphere_rejected():
    with pytest.raises(GeometryError):
        cap_sag(30.0, 10.0)


def test_shallow_cap_keeps_precision():
    # naive R - sqrt(R^2 - a^2) loses every digit here
    assert cap_sag(1.0, 1e9) == pytest.approx(1.25e-10, rel=1e-12)


@given(st.floats(1.0, 500.0), st.floats(0.01, 1.0))
def test_sag_radius_roundtrip(d, frac):
    h = frac * d / 2
    r = cap_radius(d, h)
    assert cap_sag(d, r) == pytest.approx(h, rel=1e-9)


def test_cap_geometry_consistency():
    cap = CapGeometry.from_diameter_sag(60.0, 12.0)
    assert cap.radius_um == pytest.approx(43.5)
    assert cap.sag_ratio == pytest.approx(0.2)
    assert cap.is_consistent()
    assert not CapGeometry(60.0, 12.0, 50.0).is_consistent()


def test_cap_volume_hemisphere():
    cap = CapGeometry.from_diameter_radius(20.0, 10.0)
    assert cap.volume_um3 == pytest.approx(2 / 3 * math.pi * 1000)


def test_material_rejects_subunit_index():
    with pytest.raises(ValueError):
        Material("bad", 0.9)


def test_valid_design_has_no_violations():
    assert validate_prescription(_lens()) == []


@pytest.mark.parametrize("over, rule", [
    (dict(surfaces=()), "empty"),
    (dict(entrance_beam_diameter_um=0.0), "beam"),
    (dict(entrance_beam_diameter_um=80.0), "beam"),
    (dict(wavelength_nm=-1.0), "wavelength"),
])
def test_violations_name_the_rule(over, rule):
    rules = [v.rule for v in validate_prescription(_lens(**over))]
    assert any(rule in r for r in rules), rules


def test_semi_aperture_beyond_radius_flagged():
    bad = SphericalSurface(0.0, 10.0, 12.0, GLASS)
    lens = LensPrescription((bad, SphericalSurface(20.0, None, 12.0, AIR)), entrance_beam_diameter_um=10.0)
    assert validate_prescription(lens)


def test_vertex_order_flagged():
    s1 = SphericalSurface(10.0, 79.7, 30.0, GLASS)
    s2 = SphericalSurface(5.0, -43.5, 30.0, AIR)
    lens = LensPrescription((s1, s2), entrance_beam_diameter_um=60.0)
    assert validate_prescription(lens)


def test_json_roundtrip(tmp_path):
    lens = _lens(surfaces=(
        SphericalSurface(0.0, 79.7, 48.8, GLASS),
        SphericalSurface(71.0, -43.5, 30.0, AIR, decenter_um=(1.5, -0.5)),
    ))
    path = tmp_path / "lens.json"
    save_prescription(lens, path)
    back = load_prescription(path)
    assert prescription_to_dict(back) == prescription_to_dict(lens)
    assert back.surfaces[1].decenter_um == (1.5, -0.5)
    assert json.loads(path.read_text())["surfaces"][0]["radius_um"] == 79.7


def test_planar_surface_serializes_as_null():
    lens = LensPrescription((SphericalSurface(0.0, 34.0, 30.0, GLASS), SphericalSurface(18.0, None, 30.0, AIR)),
                            entrance_beam_diameter_um=60.0)
    d = prescription_to_dict(lens)
    assert d["surfaces"][1]["radius_um"] is None
    assert prescription_from_dict(d).surfaces[1].is_planar


def test_missing_key_is_geometry_error():
    with pytest.raises(GeometryError):
        prescription_from_dict({"surfaces": []})
