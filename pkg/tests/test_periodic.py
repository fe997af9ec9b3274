import math

import numpy as np

from henonlab.core_map import PointC2, apply_map, jacobian, make_henon
from henonlab.periodic import (SaddleOrbit, Sink, classify, find_periodic,
                               find_saddles)

# closed-form eigen data for a single quadratic factor: fixed points on the
# diagonal solve y^2 + c = (1 + a) y, with Df eigenvalues y +- sqrt(y^2 - a)
A = 0.3


def _quadratic_fixed(c):
    disc = math.sqrt((1 + A) ** 2 - 4 * c)
    return ((1 + A + disc) / 2, (1 + A - disc) / 2)


def _eigs(y):
    s = np.lib.scimath.sqrt(y * y - A)
    return y + s, y - s


def test_map_a_fixed_points(map_a):
    orbits = find_periodic(map_a, 1, box=5.0)
    ys = sorted(pt[0][0].y.real for pt in orbits)
    y_lo, y_hi = sorted(_quadratic_fixed(0.0))
    assert len(orbits) == 2
    assert abs(ys[0] - y_lo) < 1e-10 and abs(ys[1] - y_hi) < 1e-10
    kinds = {round(pt[0][0].y.real, 6): type(classify(map_a, pt[0])).__name__
             for pt in orbits}
    assert kinds[0.0] == "Sink"
    assert kinds[1.3] == "SaddleOrbit"


def test_map_a_saddle_eigendata(saddle_a):
    lam_hi, lam_lo = _eigs(1.3)
    assert abs(saddle_a.lam_u - lam_hi) < 1e-9
    assert abs(saddle_a.lam_s - lam_lo) < 1e-9
    assert abs(saddle_a.lam_u * saddle_a.lam_s - A) < 1e-12
    assert abs(saddle_a.lyapunov - math.log(abs(lam_hi))) < 1e-12


def test_map_b_two_saddle_fixed_points(map_b):
    saddles = find_saddles(map_b, 1, box=5.0)
    assert len(saddles) == 2
    for s in saddles:
        y = s.points[0].y
        lam_hi, lam_lo = _eigs(y)
        pair = sorted([abs(lam_hi), abs(lam_lo)], reverse=True)
        assert abs(abs(s.lam_u) - pair[0]) < 1e-8
        assert abs(abs(s.lam_s) - pair[1]) < 1e-8
        assert abs(s.lam_u * s.lam_s - map_b.jac) < 1e-9


def test_map_b_period_two_cycle(map_b):
    orbits = find_periodic(map_b, 2, box=6.0)
    cycles = [pts for pts, period in orbits if period == 2]
    assert len(cycles) >= 1
    for pts in cycles:
        assert len(pts) == 2
        q2 = apply_map(map_b, pts[0], "forward", 2)
        scale = 1.0 + abs(pts[0].y)
        assert abs(q2.x - pts[0].x) < 1e-8 * scale
        assert abs(q2.y - pts[0].y) < 1e-8 * scale
        assert abs(pts[1].y - pts[0].y) > 1e-6  # genuinely period 2


def test_eigenvectors_are_eigenvectors(map_b, saddle_b):
    J = jacobian(map_b, saddle_b.points[0], n=saddle_b.period)
    for lam, v in ((saddle_b.lam_u, saddle_b.v_u), (saddle_b.lam_s, saddle_b.v_s)):
        v = np.asarray(v)
        assert np.linalg.norm(J @ v - lam * v) < 1e-8


def test_finder_is_deterministic(map_b):
    a = find_periodic(map_b, 2, box=6.0)
    b = find_periodic(map_b, 2, box=6.0)
    assert len(a) == len(b)
    for (pa, na), (pb, nb) in zip(a, b):
        assert na == nb
        assert all(p.x == q.x and p.y == q.y for p, q in zip(pa, pb))
