"""Raster topology of a manifold slice and the connectivity verdict.

A slice is an m x m raster of the leaf potential over the square
``[-r, r]^2`` in the chart parameter.  Cells are classed as bounded-set
(``Kplus``), escaping (``Uplus``) or undetermined; components are labeled
with 4-connectivity for the bounded class and 8-connectivity for the
escaping class so that a discrete loop of one class actually separates the
other.

The verdict logic looks for two kinds of evidence on a growing schedule of
radii:

* a compact bounded-set component, surrounded by an escaping loop of
  positive charge, stable under one resolution doubling: the leaf's bounded
  slice is disconnected;
* the absence of such witnesses together with a single growth end of the
  escaping region at every radius: evidence that the bounded slice has no
  compact piece.

Growth of an end E is detected by the harmonic-measure criterion: if E were
to die out, its circle maxima would satisfy ``M(E, t) <= 4 M(E, r) sqrt(r/t)``
for all t > r; a sampled violation certifies growth, with constant
``c = (M(t0) - 4 M(r) sqrt(r/t0)) / (4 sqrt(t0))`` so that ``M >= c sqrt(t)``
from ``t0`` on.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core_map import HenonMap
from .errors import HenonLabError, LoopMarginError
from .manifold import UnstableChart, leaf_green_many, loop_charge, normalize_chart, solve_chart
from .periodic import find_saddles

FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=int)
EIGHT_CONN = np.ones((3, 3), dtype=int)

K_PLUS, U_PLUS, UNDET = 0, 1, 2

#: minimum loop charge for a compact component to count as a witness
CHARGE_THRESHOLD = 1e-4


def worker_count(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("HENON_LAB_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return 1


@dataclass
class SliceRaster:
    chart: UnstableChart
    r: float
    m: int
    tol: float
    n_max: int
    value: np.ndarray       # (m, m) float, potential per cell
    err: np.ndarray         # (m, m) float
    cls: np.ndarray         # (m, m) uint8: K_PLUS / U_PLUS / UNDET
    steps: np.ndarray       # (m, m) int32, pre-iterates to the sector, -1 if none

    @property
    def axis(self) -> np.ndarray:
        """Cell-center coordinates along either axis."""
        return -self.r + (np.arange(self.m) + 0.5) * (2.0 * self.r / self.m)

    @property
    def undetermined_fraction(self) -> float:
        return float(np.mean(self.cls == UNDET))

    def centers(self) -> np.ndarray:
        xs = self.axis
        return xs[None, :] + 1j * xs[:, None]


def _raster_tile(chart, xs, rows, tol, n_max):
    z = (xs[None, :] + 1j * xs[rows][:, None]).ravel()
    value, err, status, n_pre = leaf_green_many(chart, z, tol=tol, n_max=n_max)
    shape = (len(rows), len(xs))
    return (value.reshape(shape), err.reshape(shape),
            status.reshape(shape), n_pre.reshape(shape))


def rasterize_slice(chart: UnstableChart, r: float, m: int, tol: float = 1e-9,
                    n_max: int = 120, threads: int | None = None,
                    tile_rows: int = 64) -> SliceRaster:
    """Evaluate the leaf potential on an m x m grid over ``[-r, r]^2``.

    Work is split into fixed row tiles computed independently, so the result
    is bit-identical for any worker count.
    """
    if m < 8:
        raise ValueError("resolution m must be at least 8")
    nw = worker_count(threads)
    xs = -r + (np.arange(m) + 0.5) * (2.0 * r / m)
    tiles = [np.arange(i, min(i + tile_rows, m)) for i in range(0, m, tile_rows)]
    if nw == 1:
        parts = [_raster_tile(chart, xs, rows, tol, n_max) for rows in tiles]
    else:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            parts = list(pool.map(
                lambda rows: _raster_tile(chart, xs, rows, tol, n_max), tiles
            ))
    value = np.vstack([p[0] for p in parts])
    err = np.vstack([p[1] for p in parts])
    status = np.vstack([p[2] for p in parts])
    n_pre = np.vstack([p[3] for p in parts])
    cls = np.full((m, m), UNDET, dtype=np.uint8)
    cls[status == 1] = K_PLUS
    cls[(status == 0) & (value > tol)] = U_PLUS
    # escaping cells whose value is below the tolerance are indistinguishable
    # from bounded ones at this resolution; fold them into the bounded class
    cls[(status == 0) & (value <= tol)] = K_PLUS
    return SliceRaster(chart=chart, r=r, m=m, tol=tol, n_max=n_max,
                       value=value, err=err, cls=cls,
                       steps=n_pre.astype(np.int32))


@dataclass
class EndRecord:
    label: int
    meets_ring: bool
    classification: str            # "growth" | "decay" | "unclassified"
    samples: list[tuple[float, float]]   # (radius, circle max)
    growth_const: float | None


@dataclass
class WitnessRecord:
    label: int
    n_cells: int
    bbox: tuple[float, float, float, float]     # re_lo, im_lo, re_hi, im_hi
    charge: float | None
    loop: list[complex] | None


@dataclass
class ComponentReport:
    r: float
    m: int
    n_kplus: int
    n_uplus: int
    c_count: int
    g_count: int
    undetermined_fraction: float
    witness_threshold: float
    ends: list[EndRecord]
    witnesses: list[WitnessRecord]


def _witness_loop(raster: SliceRaster, high: np.ndarray, bbox_idx, max_pad: int = 8):
    """A rectangle of definitely-escaping cells around a component, or None."""
    i0, i1, j0, j1 = bbox_idx
    m = raster.m
    xs = raster.axis
    for pad in range(2, max_pad + 1):
        ai, bi = i0 - pad, i1 + pad
        aj, bj = j0 - pad, j1 + pad
        if ai < 0 or aj < 0 or bi >= m or bj >= m:
            return None
        ring_ok = (
            np.all(high[ai, aj:bj + 1])
            and np.all(high[bi, aj:bj + 1])
            and np.all(high[ai:bi + 1, aj])
            and np.all(high[ai:bi + 1, bj])
        )
        if ring_ok:
            lo = complex(xs[aj], xs[ai])
            hi = complex(xs[bj], xs[bi])
            return [lo, complex(hi.real, lo.imag), hi, complex(lo.real, hi.imag)]
    return None


def label_components(raster: SliceRaster, ring_frac: float = 0.9,
                     base_frac: float = 0.125, n_radii: int = 8,
                     charge_loops: bool = True, witness_quantile: float = 0.02,
                     max_charged: int = 40,
                     green_tol: float = 1e-12) -> ComponentReport:
    """Connected components of both classes, ends, and compact witnesses.

    Witness candidates come from the low set ``{G <= tau}`` with ``tau`` an
    adaptive quantile of the escaping values, not from the bounded class
    alone: a totally disconnected bounded slice (dust) has measure zero and
    is never hit by cell centers, but it pushes the potential down on a
    neighborhood that the quantile picks up.  The loop charge is the actual
    filter; a dust-free low island gets charge zero and is discarded later.
    """
    k_mask = raster.cls == K_PLUS
    u_mask = raster.cls == U_PLUS
    k_labels, n_k = ndimage.label(k_mask, structure=FOUR_CONN)
    u_labels, n_u = ndimage.label(u_mask, structure=EIGHT_CONN)

    m = raster.m
    border = np.zeros((m, m), dtype=bool)
    border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True

    az = np.abs(raster.centers())
    xs = raster.axis

    # --- compact low-potential components and their charge loops
    if u_mask.any():
        tau = float(np.quantile(raster.value[u_mask], witness_quantile))
    else:
        tau = raster.tol
    tau = max(tau, raster.tol)
    low_mask = k_mask | (u_mask & (raster.value <= tau))
    high = u_mask & (raster.value > tau)
    low_labels, n_low = ndimage.label(low_mask, structure=FOUR_CONN)
    low_boundary = set(np.unique(low_labels[border & low_mask]).tolist()) - {0}

    witnesses: list[WitnessRecord] = []
    slices = ndimage.find_objects(low_labels)
    compact = [lab for lab in range(1, n_low + 1) if lab not in low_boundary]
    sizes = {lab: int(np.sum(low_labels[slices[lab - 1]] == lab)) for lab in compact}
    compact.sort(key=lambda lab: (-sizes[lab], lab))
    for lab in compact[:max_charged]:
        sl = slices[lab - 1]
        i0, i1 = sl[0].start, sl[0].stop - 1
        j0, j1 = sl[1].start, sl[1].stop - 1
        bbox = (float(xs[j0]), float(xs[i0]), float(xs[j1]), float(xs[i1]))
        loop = _witness_loop(raster, high, (i0, i1, j0, j1))
        charge = None
        if loop is not None and charge_loops:
            try:
                charge = loop_charge(raster.chart, loop, tol=green_tol,
                                     n_max=raster.n_max).value
            except (LoopMarginError, HenonLabError):
                charge = None
        witnesses.append(WitnessRecord(label=lab, n_cells=sizes[lab], bbox=bbox,
                                       charge=charge, loop=loop))

    # --- ends of the escaping region outside the base radius
    base = base_frac * raster.r
    end_mask = u_mask & (az > base)
    end_labels, n_ends = ndimage.label(end_mask, structure=EIGHT_CONN)
    ring = az >= ring_frac * raster.r
    ring_labels = set(np.unique(end_labels[ring & end_mask]).tolist()) - {0}

    edges = np.geomspace(base, raster.r, n_radii + 1)
    mids = np.sqrt(edges[:-1] * edges[1:])
    bin_idx = np.clip(np.searchsorted(edges, az, side="right") - 1, 0, n_radii - 1)

    ends: list[EndRecord] = []
    for lab in range(1, n_ends + 1):
        sel = end_labels == lab
        samples = []
        for b in range(n_radii):
            cells = sel & (bin_idx == b) & (az <= raster.r)
            if cells.any():
                samples.append((float(mids[b]), float(raster.value[cells].max())))
        meets = lab in ring_labels
        if len(samples) < 3:
            ends.append(EndRecord(lab, meets, "unclassified", samples, None))
            continue
        s_b, m_b = samples[0]
        classification = "decay"
        growth_const = None
        if meets:
            best = 0.0
            for s_i, m_i in samples[1:]:
                alpha = m_i - 4.0 * m_b * math.sqrt(s_b / s_i)
                if alpha > best:
                    best = alpha
                    growth_const = alpha / (4.0 * math.sqrt(s_i))
            if growth_const is not None and best > 0.0:
                classification = "growth"
            else:
                growth_const = None
        ends.append(EndRecord(lab, meets, classification, samples, growth_const))

    c_count = len(ring_labels)
    g_count = sum(1 for e in ends if e.classification == "growth")
    return ComponentReport(
        r=raster.r, m=m, n_kplus=n_k, n_uplus=n_u,
        c_count=c_count, g_count=g_count,
        undetermined_fraction=raster.undetermined_fraction,
        witness_threshold=tau,
        ends=ends, witnesses=witnesses,
    )


# ---------------------------------------------------------------------------
# verdict
# ---------------------------------------------------------------------------


@dataclass
class Verdict:
    status: str                     # "UnstablyDisconnected" | "UnstablyConnectedEvidence" | "Inconclusive"
    reason: str
    j_connected: bool | None
    analyzed: str                   # "map" | "inverse"
    r_max: float | None
    resolution: int | None
    witness: WitnessRecord | None
    witness_r: float | None
    levels: list[ComponentReport] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 2 if self.status == "Inconclusive" else 0


def _stable_witness(chart, r, m, tol, n_max, threads, witness: WitnessRecord):
    """Re-raster at doubled resolution and look for the witness again."""
    raster2 = rasterize_slice(chart, r, 2 * m, tol=tol, n_max=n_max, threads=threads)
    rep2 = label_components(raster2)
    re_lo, im_lo, re_hi, im_hi = witness.bbox
    pad = 2.0 * r / m
    for w in rep2.witnesses:
        if w.charge is None or w.charge <= CHARGE_THRESHOLD:
            continue
        b = w.bbox
        if (b[0] <= re_hi + pad and b[2] >= re_lo - pad
                and b[1] <= im_hi + pad and b[3] >= im_lo - pad):
            return w
    return None


def connectivity_verdict(hmap: HenonMap, period: int = 1, m: int = 1024,
                         n_series: int = 60, schedule: list[float] | None = None,
                         tol: float = 1e-9, n_max: int = 120,
                         threads: int | None = None, und_budget: float = 0.01,
                         seed_box: float = 5.0,
                         collect_rasters: list | None = None) -> Verdict:
    """Decide between witnessed disconnection and stable connection evidence.

    When the Jacobian modulus exceeds 1, the inverse map is analyzed instead
    (stable manifolds, backward potential); the bounded sets and hence the
    connectivity conclusion are shared between a map and its inverse.
    """
    analyzed = "map" if abs(hmap.jac) <= 1.0 else "inverse"
    direction = "forward" if analyzed == "map" else "backward"

    def inconclusive(reason):
        return Verdict(status="Inconclusive", reason=reason, j_connected=None,
                       analyzed=analyzed, r_max=None, resolution=m,
                       witness=None, witness_r=None)

    if m < 64:
        return inconclusive(f"resolution {m} is below the minimum of 64")
    saddles = find_saddles(hmap, period, box=seed_box)
    if not saddles:
        return inconclusive(f"no saddle orbit of period dividing {period} was found")
    saddle = saddles[0]
    chart = normalize_chart(solve_chart(hmap, saddle, n_series=n_series,
                                        direction=direction))
    lam = abs(chart.multiplier)
    if schedule is None:
        schedule = [lam ** j for j in range(1, 7)]
    lyap = math.log(lam) / chart.period
    g_bound = 2.0 * math.log(hmap.degree) / lyap

    levels: list[ComponentReport] = []
    prev_c = prev_g = 0
    for r in schedule:
        raster = rasterize_slice(chart, r, m, tol=tol, n_max=n_max, threads=threads)
        if collect_rasters is not None:
            collect_rasters.append(raster)
        if raster.undetermined_fraction > und_budget:
            v = inconclusive(
                f"undetermined cell fraction {raster.undetermined_fraction:.4f} "
                f"exceeds the budget {und_budget} at r = {r:.6g}"
            )
            v.levels = levels
            return v
        report = label_components(raster)
        levels.append(report)
        if report.c_count < prev_c or report.g_count < prev_g:
            v = inconclusive(
                f"end counts decreased between radii (c {prev_c}->{report.c_count}, "
                f"g {prev_g}->{report.g_count})"
            )
            v.levels = levels
            return v
        prev_c, prev_g = report.c_count, report.g_count
        if report.g_count > g_bound:
            v = inconclusive(
                f"growth end count {report.g_count} exceeds the bound "
                f"{g_bound:.4f} at r = {r:.6g}"
            )
            v.levels = levels
            return v
        for w in report.witnesses:
            if w.charge is not None and w.charge > CHARGE_THRESHOLD:
                confirmed = _stable_witness(chart, r, m, tol, n_max, threads, w)
                if confirmed is not None:
                    return Verdict(
                        status="UnstablyDisconnected",
                        reason=(f"compact bounded-set component with loop charge "
                                f"{w.charge:.6g} at r = {r:.6g}, stable under "
                                f"resolution doubling"),
                        j_connected=False, analyzed=analyzed,
                        r_max=r, resolution=m, witness=w, witness_r=r,
                        levels=levels,
                    )

    # no witness anywhere; confirm the last level is refinement stable
    r_last = schedule[-1]
    raster2 = rasterize_slice(chart, r_last, 2 * m, tol=tol, n_max=n_max,
                              threads=threads)
    rep2 = label_components(raster2)
    charged = [w for w in rep2.witnesses
               if w.charge is not None and w.charge > CHARGE_THRESHOLD]
    if charged or rep2.c_count != levels[-1].c_count or rep2.g_count != levels[-1].g_count:
        v = inconclusive("refinement doubling at the largest radius changed the picture")
        v.levels = levels
        return v
    return Verdict(
        status="UnstablyConnectedEvidence",
        reason=(f"no charged compact component up to r = {r_last:.6g} at "
                f"resolution {m}, refinement stable"),
        j_connected=True, analyzed=analyzed,
        r_max=r_last, resolution=m, witness=None, witness_r=None,
        levels=levels,
    )
