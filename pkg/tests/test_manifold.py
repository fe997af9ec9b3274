import math

import numpy as np
import pytest

from henonlab.core_map import PointC2, apply_map
from henonlab.errors import LoopMarginError, NotEscapingError
from henonlab.manifold import (chart_residual, eval_chart, leaf_bottcher,
                               leaf_green, loop_charge, max_modulus,
                               normalize_chart, solve_chart)
from henonlab.potential import green


def test_chart_functional_equation(map_a, chart_a):
    lam = chart_a.multiplier
    for z in (0.2 + 0.1j, -0.8j, 1.5, 3.0 - 2.0j):
        lhs = eval_chart(chart_a, lam * z)
        rhs = apply_map(map_a, eval_chart(chart_a, z))
        scale = 1.0 + abs(rhs.x) + abs(rhs.y)
        assert abs(lhs.x - rhs.x) < 1e-8 * scale
        assert abs(lhs.y - rhs.y) < 1e-8 * scale


def test_chart_anchored_at_saddle(chart_a, saddle_a):
    base = eval_chart(chart_a, 0.0)
    assert abs(base.x - saddle_a.points[0].x) < 1e-12
    assert abs(base.y - saddle_a.points[0].y) < 1e-12


def test_chart_residual_small(chart_a, chart_b):
    assert chart_residual(chart_a) < 1e-9
    assert chart_residual(chart_b) < 1e-9


def test_normalization_unit_circle(chart_a, chart_b):
    assert abs(max_modulus(chart_a, 1.0) - 1.0) < 1e-5
    assert abs(max_modulus(chart_b, 1.0) - 1.0) < 1e-5


def test_max_modulus_doubles_along_multiplier(chart_a):
    lam = abs(chart_a.multiplier)
    for n in (1, 2, 3):
        m = max_modulus(chart_a, lam ** n)
        assert abs(m - 2.0 ** n) / 2.0 ** n < 1e-6


def test_leaf_green_matches_ambient(chart_a, map_a):
    for z in (2.0, 3.5 + 1.0j, -4.0 + 0.5j):
        g, err, status = leaf_green(chart_a, z)
        if status != 0:
            continue
        gq = green(map_a, eval_chart(chart_a, z))
        assert gq.escaped
        assert abs(g - gq.value) < 1e-9 * (1.0 + g)


def test_leaf_green_scales_with_multiplier(chart_a):
    z = 1.7 - 0.4j
    g1, _, s1 = leaf_green(chart_a, z)
    g2, _, s2 = leaf_green(chart_a, chart_a.multiplier * z)
    assert s1 == 0 and s2 == 0
    assert abs(g2 - chart_a.hmap.degree * g1) < 1e-9 * (1.0 + g2)


def test_leaf_bottcher_modulus_is_potential(chart_a):
    base = 4.0  # image well inside V+
    for z in (3.0, 2.0 + 2.0j):
        bv = leaf_bottcher(chart_a, z, base_z=base)
        g, _, status = leaf_green(chart_a, z)
        assert status == 0
        assert abs(abs(bv.value) - math.exp(g)) < 1e-9 * math.exp(g)
        assert abs(np.exp(bv.log) - bv.value) < 1e-12 * abs(bv.value)


def test_leaf_bottcher_needs_escaping_base(chart_a):
    with pytest.raises(NotEscapingError):
        leaf_bottcher(chart_a, 3.0, base_z=0.01)


def test_mass_free_loop_has_zero_charge(chart_a):
    # a small circle deep in the escaping region encloses no potential mass
    c = loop_charge(chart_a, ("circle", 4.0 + 0.0j, 0.3))
    assert abs(c.value) < 1e-6


def test_polygon_loop_agrees_with_circle(chart_a):
    circ = loop_charge(chart_a, ("circle", 4.0 + 0.0j, 0.3))
    n = 64
    verts = [4.0 + 0.3 * np.exp(2j * np.pi * k / n) for k in range(n)]
    poly = loop_charge(chart_a, verts)
    assert abs(poly.value - circ.value) < 1e-6


def test_loop_through_bounded_set_rejected(chart_a):
    # every centered circle in this leaf crosses the bounded slice
    with pytest.raises(LoopMarginError):
        loop_charge(chart_a, ("circle", 0.0 + 0.0j, 2.0))


def test_backward_chart_exists(map_b, saddle_b):
    chart = solve_chart(map_b, saddle_b, n_series=40, direction="backward")
    assert chart.direction == "backward"
    assert abs(chart.multiplier) > 1.0
    # parametrizes the stable manifold: F^{-1}(psi(z)) = psi(multiplier z)
    z = 0.05 + 0.02j
    lhs = eval_chart(chart, chart.multiplier * z)
    rhs = apply_map(map_b, eval_chart(chart, z), "backward")
    assert abs(lhs.x - rhs.x) < 1e-8
    assert abs(lhs.y - rhs.y) < 1e-8
