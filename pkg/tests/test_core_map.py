import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from henonlab.core_map import (HenonMap, PointC2, apply_map, escape_radius,
                               jacobian, make_henon, orbit_classify,
                               verify_radius)
from henonlab.errors import MapDefinitionError


def test_single_factor_step(map_a):
    # (x, y) -> (y, y^2 - a x), by hand at (0, 4)
    q = apply_map(map_a, PointC2(0.0, 4.0))
    assert q.x == 4.0
    assert q.y == 16.0


def test_two_factor_composition():
    hmap = make_henon([((0j, 0j), 0.3), ((-6 + 0j, 0j), 0.5)])
    # factors act in list order
    q = apply_map(hmap, PointC2(1.0, 2.0))
    x1, y1 = 2.0, 2.0 ** 2 - 0.3 * 1.0          # first factor
    x2, y2 = y1, y1 ** 2 - 6.0 - 0.5 * x1       # second factor
    assert q.x == x2 and q.y == y2
    assert hmap.degree == 4
    assert abs(hmap.jac - 0.15) < 1e-15


def test_degenerate_factor_rejected():
    with pytest.raises(MapDefinitionError):
        make_henon([((0j, 0j), 0.0)])
    with pytest.raises(MapDefinitionError):
        make_henon([((0j,), 0.3)])  # degree 1 polynomial


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_inverse_roundtrip(xr, xi, yr, yi):
    hmap = make_henon([((-1 + 0j, 0.5 + 0j), 0.7)])
    q = PointC2(complex(xr, xi), complex(yr, yi))
    fwd = apply_map(hmap, q, "forward")
    back = apply_map(hmap, fwd, "backward")
    scale = 1.0 + abs(q.x) + abs(q.y)
    assert abs(back.x - q.x) < 1e-9 * scale
    assert abs(back.y - q.y) < 1e-9 * scale


def test_jacobian_matches_finite_difference(map_b):
    q = PointC2(0.3 + 0.1j, -0.7 + 0.2j)
    J = jacobian(map_b, q, n=3)
    h = 1e-7
    base = apply_map(map_b, q, "forward", 3)
    for col, dq in enumerate((PointC2(q.x + h, q.y), PointC2(q.x, q.y + h))):
        moved = apply_map(map_b, dq, "forward", 3)
        fd = np.array([(moved.x - base.x) / h, (moved.y - base.y) / h])
        assert np.allclose(J[:, col], fd, rtol=1e-5, atol=1e-5)
    assert abs(np.linalg.det(J) - map_b.jac ** 3) < 1e-8


def test_jacobian_backward_inverts_forward(map_b):
    q = PointC2(0.4, -1.2)
    fwd = jacobian(map_b, q, n=1, direction="forward")
    back = jacobian(map_b, apply_map(map_b, q), n=1, direction="backward")
    assert np.allclose(back @ fwd, np.eye(2), atol=1e-12)


def test_radius_verifier_examples():
    for c in (6.0, -6.0):
        hmap = make_henon([((c + 0j, 0j), 0.3)])
        assert not verify_radius(hmap, 3.0)
        assert verify_radius(hmap, 4.0)
    assert verify_radius(make_henon([((0j, 0j), 0.3)]), 3.0)


def test_escape_radius_certified(map_a, map_b):
    for hmap in (map_a, map_b):
        R, info = escape_radius(hmap)
        assert info["certified"]
        assert R <= info["closed_form"] + 1e-12
        assert verify_radius(hmap, R)


def test_orbit_classification(map_a):
    assert orbit_classify(map_a, PointC2(0.0, 4.0)).summary.startswith("EscapesForward")
    # the origin is a sink of map A, bounded in both directions it is not;
    # backward orbits leave along the unstable cone of infinity
    cls = orbit_classify(map_a, PointC2(0.0, 0.0))
    assert cls.forward[0] == "bounded"
    big = orbit_classify(map_a, PointC2(50.0, 0.1))
    assert big.backward[0] == "escapes"


def test_polynomial_evaluation_horner_vs_numpy(map_b):
    poly = map_b.factors[0].poly
    zs = np.array([0.3 + 1j, -2.0, 5.5 - 0.25j])
    manual = np.polyval(poly.descending, zs)
    assert np.allclose(poly(zs), manual, rtol=0, atol=1e-14)
    assert poly(2.0) == -2.0
