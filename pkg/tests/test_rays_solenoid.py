import math

import numpy as np
import pytest

from henonlab.core_map import PointC2, apply_map
from henonlab.errors import NotEscapingError
from henonlab.manifold import _log_leaf_bottcher, leaf_green
from henonlab.rays_solenoid import (landing_stats, solenoid_coords, trace_ray)


def _wrap(a):
    return math.remainder(a, 2.0 * math.pi)


def test_trace_levels_and_argument(chart_a):
    rt = trace_ray(chart_a, 0.7, 1.0, 1e-6)
    gs = [g for g, _ in rt.samples]
    assert all(b < a for a, b in zip(gs, gs[1:]))
    assert gs[0] == 1.0 and gs[-1] < 1e-6
    for g, z in rt.samples:
        w = _log_leaf_bottcher(chart_a, z, rt.samples[0][1].imag * 0.0 + 0.7)
        assert abs(w.real - g) < 1e-6
        assert abs(_wrap(w.imag - 0.7)) < 1e-6


def test_trace_lands_on_connected_example(chart_a):
    rt = trace_ray(chart_a, 2.1, 1.0, 1e-6)
    assert rt.landed
    assert rt.endpoint is not None
    assert rt.endpoint_diameter < 1e-3
    g, _, status = leaf_green(chart_a, rt.endpoint)
    assert status == 0 and g < 1e-6


def test_conjugacy_push(chart_a):
    # the image of the theta ray under the map is the (d theta) ray at
    # d-scaled levels; in chart coordinates the map is z -> multiplier z
    d = chart_a.hmap.degree
    theta = 0.45
    rt = trace_ray(chart_a, theta, 0.5, 1e-3)
    for g, z in rt.samples[::4]:
        w = _log_leaf_bottcher(chart_a, chart_a.multiplier * z, d * theta)
        assert abs(w.real - d * g) < 1e-6
        assert abs(_wrap(w.imag - d * theta)) < 1e-6


def test_trace_precondition():
    with pytest.raises(ValueError):
        trace_ray(None, 0.0, 1e-6, 1.0)


def test_landing_stats_quick(chart_a):
    rep = landing_stats(chart_a, 32, 1e-6, 1e-3)
    assert rep.n_rays == 32
    assert rep.fraction_landed >= 0.95
    assert len(rep.traces) == 32
    for t in rep.traces:
        if t.landed:
            g, _, status = leaf_green(chart_a, t.endpoint)
            assert status == 0 and g < 1e-6
    with pytest.raises(ValueError):
        landing_stats(chart_a, 8, 1e-6, 1e-3)


def test_solenoid_window_invariants(map_a):
    q = PointC2(0.1, 3.5)
    win = solenoid_coords(map_a, q, -6, 6)
    assert len(win.log_z) == 13
    assert all(v.real > 0.0 for v in win.log_z)       # |z_j| > 1
    assert max(win.residuals) < 1e-8
    # log|z_0| is the potential of q itself
    from henonlab.potential import green
    assert abs(win.entry(0).real - green(map_a, q).value) < 1e-8


def test_solenoid_shift_compatibility(map_b):
    q = PointC2(-0.2, 3.9)
    win = solenoid_coords(map_b, q, -6, 6)
    shifted = solenoid_coords(map_b, apply_map(map_b, q), -6, 5)
    for j in range(-6, 6):
        assert abs(shifted.entry(j) - win.entry(j + 1)) < 1e-8


def test_solenoid_rejects_bounded_orbit(map_a):
    with pytest.raises(NotEscapingError):
        solenoid_coords(map_a, PointC2(0.0, 0.0), -2, 2, n_max=50)


def test_solenoid_window_validation(map_a):
    with pytest.raises(ValueError):
        solenoid_coords(map_a, PointC2(0.0, 4.0), 1, 3)
