"""End-to-end acceptance checks.

Each test prints one pass line and asserts its own runtime budget.  The
numeric targets are either exact relations (functional equations, shift
compatibility), independent oracles (one-variable escape rates, quadratic
eigenvalues), or property-level renderings of the underlying theory.
"""

import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from henonlab.core_map import PointC2, apply_map, make_henon, step_arrays
from henonlab.manifold import (loop_charge, max_modulus, normalize_chart,
                               solve_chart)
from henonlab.periodic import find_saddles
from henonlab.potential import (green, green_many, in_sector_plus,
                                log_bottcher_vplus_many)
from henonlab.rays_solenoid import landing_stats, solenoid_coords
from henonlab.slice_topology import (CHARGE_THRESHOLD, connectivity_verdict,
                                     label_components, rasterize_slice)

MAPS = {"A": [((0j, 0j), 0.3)], "B": [((-6 + 0j, 0j), 0.3)]}


def _escaping_cloud(hmap, n, rng, box=4.0):
    xs = np.empty(0, dtype=complex)
    ys = np.empty(0, dtype=complex)
    while xs.size < n:
        x, y = rng.uniform(-box, box, (2, 4 * n))
        vals, _, status, _ = green_many(hmap, x, y)
        keep = status == 0
        xs = np.concatenate([xs, x[keep]])
        ys = np.concatenate([ys, y[keep]])
    return xs[:n], ys[:n]


def test_criterion_1_functional_equations():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    for name, spec in MAPS.items():
        hmap = make_henon(spec)
        d = hmap.degree
        x, y = _escaping_cloud(hmap, 1000, rng)
        g, _, status, _ = green_many(hmap, x, y)
        xf, yf = step_arrays(hmap, x, y, "forward")
        gf, _, sf, _ = green_many(hmap, xf, yf)
        assert np.all(status == 0) and np.all(sf == 0)
        assert np.max(np.abs(gf - d * g) / (1.0 + g)) < 1e-9

        # Bottcher functional equation on V+
        yv = rng.uniform(5.0, 9.0, 1000) * np.exp(2j * np.pi * rng.uniform(size=1000))
        xv = rng.uniform(-2.0, 2.0, 1000).astype(complex)
        T, _ = log_bottcher_vplus_many(hmap, xv, yv)
        xvf, yvf = step_arrays(hmap, xv, yv, "forward")
        Tf, _ = log_bottcher_vplus_many(hmap, xvf, yvf)
        phi, phi_f = np.exp(T), np.exp(Tf)
        assert np.max(np.abs(phi_f - phi ** d) / np.abs(phi_f)) < 1e-8
    dt = time.perf_counter() - t0
    assert dt < 5.0
    print(f"criterion 1 ok: functional equations on 1000 points/map ({dt:.2f} s)")


def test_criterion_2_one_dimensional_degeneration():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    for c in (0.0, -1.0, -6.0):
        hmap = make_henon([((complex(c), 0j), 1e-6)])
        ys = np.empty(0)
        while ys.size < 1000:
            y = rng.uniform(-3.0, 3.0, 4000)
            w = y.copy()
            g1d = np.full(y.size, np.nan)
            scale = np.ones(y.size)
            for _ in range(80):
                live = np.isnan(g1d)
                w[live] = w[live] * w[live] + c
                scale[live] *= 0.5
                esc = live & (np.abs(w) > 1e10)
                g1d[esc] = np.log(np.abs(w[esc])) * scale[esc]
            ok = ~np.isnan(g1d)
            y, g1d = y[ok], g1d[ok]
            g2, _, status, _ = green_many(hmap, np.zeros(y.size), y)
            good = status == 0
            assert np.max(np.abs(g2[good] - g1d[good])) < 1e-3
            ys = np.concatenate([ys, y[good]])
    dt = time.perf_counter() - t0
    assert dt < 5.0
    print(f"criterion 2 ok: 1D escape-rate oracle matched for c in (0,-1,-6) ({dt:.2f} s)")


def test_criterion_3_saddle_data():
    t0 = time.perf_counter()
    hmap = make_henon(MAPS["A"])
    saddles = find_saddles(hmap, 1, box=5.0)
    assert len(saddles) == 1
    s = saddles[0]
    p = s.points[0]
    assert abs(p.x - 1.3) < 1e-10 and abs(p.y - 1.3) < 1e-10
    # quadratic eigen oracle: lambda = y +- sqrt(y^2 - a) at y = 1.3
    lam_u = 1.3 + math.sqrt(1.3 ** 2 - 0.3)
    lam_s = 1.3 - math.sqrt(1.3 ** 2 - 0.3)
    assert abs(s.lam_u - lam_u) < 1e-6
    assert abs(s.lam_s - lam_s) < 1e-6
    assert abs(round(s.lam_u.real, 5) - 2.47898) < 1e-9
    assert abs(round(s.lam_s.real, 5) - 0.12102) < 1e-9
    assert abs(s.lam_u * s.lam_s - 0.3) < 1e-9
    dt = time.perf_counter() - t0
    assert dt < 1.0
    print(f"criterion 3 ok: saddle (1.3, 1.3) eigen data vs quadratic oracle ({dt:.2f} s)")


def test_criterion_4_metric_normalization():
    t0 = time.perf_counter()
    hmap = make_henon(MAPS["A"])
    saddle = find_saddles(hmap, 1, box=5.0)[0]
    chart = normalize_chart(solve_chart(hmap, saddle, n_series=60))
    lam = abs(chart.multiplier)
    for n in (1, 2, 3, 4):
        m = max_modulus(chart, lam ** n)
        assert abs(m - 2.0 ** n) / 2.0 ** n < 0.02
    m1, m4 = max_modulus(chart, lam), max_modulus(chart, lam ** 4)
    slope = (math.log(m4) - math.log(m1)) / (math.log(lam ** 4) - math.log(lam))
    assert abs(slope - 0.7633) < 0.02
    dt = time.perf_counter() - t0
    assert dt < 30.0
    print(f"criterion 4 ok: M(p, lam^n) = 2^n, secant slope {slope:.4f} ({dt:.2f} s)")


def test_criterion_5_single_growth_end():
    t0 = time.perf_counter()
    hmap = make_henon(MAPS["A"])
    saddle = find_saddles(hmap, 1, box=5.0)[0]
    chart = normalize_chart(solve_chart(hmap, saddle, n_series=60))
    lam = abs(chart.multiplier)
    bound = int(2.0 * math.log(2.0) / 0.90807)   # = 1
    assert bound == 1
    for r in (lam, lam ** 2, lam ** 3):
        rep = label_components(rasterize_slice(chart, r, 1024))
        assert rep.c_count == 1
        assert rep.g_count == 1 <= bound
        growth = [e for e in rep.ends if e.classification == "growth"]
        assert len(growth) == 1
        c = growth[0].growth_const
        assert c is not None and c > 0.0
        s_max, m_max = growth[0].samples[-1]
        assert m_max >= c * math.sqrt(s_max)
    dt = time.perf_counter() - t0
    assert dt < 60.0
    print(f"criterion 5 ok: exactly one growth end at three radii, m=1024 ({dt:.2f} s)")


@pytest.mark.parametrize("name,status,connected", [
    ("A", "UnstablyConnectedEvidence", True),
    ("B", "UnstablyDisconnected", False),
])
def test_criterion_6_verdicts(name, status, connected):
    t0 = time.perf_counter()
    hmap = make_henon(MAPS[name])
    v = connectivity_verdict(hmap, m=1024)
    assert v.status == status
    assert v.j_connected is connected
    if name == "B":
        assert v.witness is not None
        assert v.witness.charge > CHARGE_THRESHOLD
    dt = time.perf_counter() - t0
    assert dt < 120.0
    print(f"criterion 6 ok: map {name} -> {status}, J "
          f"{'connected' if connected else 'disconnected'} ({dt:.1f} s)")


def test_criterion_7_loop_charges():
    t0 = time.perf_counter()
    hmap = make_henon(MAPS["B"])
    saddle = find_saddles(hmap, 1, box=5.0)[0]
    chart = normalize_chart(solve_chart(hmap, saddle, n_series=60))
    # mass-free loop
    zero = loop_charge(chart, ("circle", 4.0 + 0.0j, 0.3))
    assert abs(zero.value) < 1e-6
    # charged witnesses and additivity over a union rectangle
    rep = label_components(rasterize_slice(chart, 4.2, 512))
    charged = [w for w in rep.witnesses
               if w.charge is not None and w.charge > CHARGE_THRESHOLD]
    assert len(charged) >= 2
    boxes = np.array([w.bbox for w in charged[:2]])
    lo_x, lo_y = boxes[:, 0].min(), boxes[:, 1].min()
    hi_x, hi_y = boxes[:, 2].max(), boxes[:, 3].max()
    pad = 0.2
    rect = [complex(lo_x - pad, lo_y - pad), complex(hi_x + pad, lo_y - pad),
            complex(hi_x + pad, hi_y + pad), complex(lo_x - pad, hi_y + pad)]
    union = loop_charge(chart, rect)
    enclosed = [w for w in charged
                if lo_x - pad <= w.bbox[0] and w.bbox[2] <= hi_x + pad
                and lo_y - pad <= w.bbox[1] and w.bbox[3] <= hi_y + pad]
    assert abs(union.value - sum(w.charge for w in enclosed)) < 1e-5
    dt = time.perf_counter() - t0
    assert dt < 30.0
    print(f"criterion 7 ok: zero mass {zero.value:.2e}, additivity over "
          f"{len(enclosed)} components ({dt:.2f} s)")


def test_criterion_8_rays_and_solenoid():
    t0 = time.perf_counter()
    hmap = make_henon(MAPS["A"])
    saddle = find_saddles(hmap, 1, box=5.0)[0]
    chart = normalize_chart(solve_chart(hmap, saddle, n_series=60))
    rep = landing_stats(chart, 256, 1e-6, 1e-3)
    assert rep.fraction_landed >= 0.95

    rng = np.random.default_rng(8)
    n = 0
    while n < 100:
        x, y = rng.uniform(-3.0, 3.0, 2)
        q = PointC2(x, y)
        gv = green(hmap, q)
        if not (gv.escaped and gv.value > 1e-6):
            continue
        win = solenoid_coords(hmap, q, -6, 6)
        assert max(win.residuals) < 1e-8            # z_{j+1} = z_j^d
        assert abs(win.entry(0).real - gv.value) < 1e-8
        shifted = solenoid_coords(hmap, apply_map(hmap, q), -6, 5)
        assert max(abs(shifted.entry(j) - win.entry(j + 1))
                   for j in range(-6, 6)) < 1e-8    # shift compatibility
        n += 1
    dt = time.perf_counter() - t0
    assert dt < 120.0
    print(f"criterion 8 ok: landed {rep.fraction_landed:.3f} of 256 rays, "
          f"100 solenoid windows ({dt:.1f} s)")


def test_criterion_9_thread_determinism(tmp_path):
    outputs = {}
    for name, spec in (("A", "y^2;a=0.3"), ("B", "y^2-6;a=0.3")):
        for threads in ("1", "8"):
            out = tmp_path / f"{name}_{threads}"
            env = dict(os.environ, HENON_LAB_THREADS=threads)
            proc = subprocess.run(
                [sys.executable, "-m", "henonlab.cli", "verdict",
                 "--map", spec, "--period", "1", "--m", "1024",
                 "--out", str(out)],
                env=env, capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            outputs[(name, threads)] = (
                (out / "report.json").read_bytes(),
                (out / "slice.ppm").read_bytes(),
            )
    for name in ("A", "B"):
        assert outputs[(name, "1")][0] == outputs[(name, "8")][0]
        assert outputs[(name, "1")][1] == outputs[(name, "8")][1]
    print("criterion 9 ok: bit-identical report.json and PPM for 1 and 8 workers")
