"""External rays in an unstable leaf and truncated solenoid coordinates.

Rays are radial lines in the leaf Bottcher coordinate.  We trace them by
argument-locked Newton continuation on ``log phi`` rather than integrating
the gradient of the potential: the target argument stays pinned to the ray
angle, so the branch of the logarithm is never in doubt and the iteration
stays well conditioned down to very small potential levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core_map import HenonMap, PointC2, apply_map
from .errors import ChartDomainError, NotEscapingError
from .manifold import UnstableChart, _log_leaf_bottcher_many, eval_chart
from .potential import in_sector_plus, log_bottcher_vplus

NEWTON_TOL = 1e-9
CAUCHY_WINDOW = 8


@dataclass(frozen=True)
class RayTrace:
    """A traced external ray in chart coordinates.

    ``samples`` is a tuple of (potential level, chart point) pairs with
    strictly decreasing levels.  ``endpoint`` is present only when the tail
    of the trace is Cauchy within ``land_tol``.
    """

    theta: float
    samples: tuple
    landed: bool
    endpoint: Optional[complex]
    endpoint_diameter: float
    fail_level: Optional[float] = None


@dataclass(frozen=True)
class LandingReport:
    n_rays: int
    fraction_landed: float
    endpoints: tuple
    traces: tuple


# ---------------------------------------------------------------------------
# Newton continuation on the leaf Bottcher logarithm
# ---------------------------------------------------------------------------


def _newton_batch(chart, z, target, wprime, tol, max_iter=30):
    """Solve log phi(psi(z)) = target entrywise.

    Returns updated points, a success mask and the derivative estimates.
    The finite-difference step is scaled with the target level so that the
    probe points never wander far enough in argument to confuse the branch
    selection deep in the functional-equation descent.
    """
    z = np.array(z, dtype=complex)
    target = np.asarray(target, dtype=complex)
    wprime = np.array(wprime, dtype=complex)
    n = z.size
    ok = np.zeros(n, dtype=bool)
    dead = np.zeros(n, dtype=bool)
    for _ in range(max_iter):
        act = np.nonzero(~ok & ~dead)[0]
        if act.size == 0:
            break
        za = z[act]
        g = np.maximum(target.real[act], 1e-300)
        h = np.minimum(1e-6 * (1.0 + np.abs(za)),
                       0.02 * g / np.maximum(np.abs(wprime[act]), 1e-12))
        h = np.maximum(h, 1e-14 * (1.0 + np.abs(za)))
        zs = np.concatenate([za, za + h, za - h])
        ref = np.tile(target.imag[act], 3)
        w = _log_leaf_bottcher_many(chart, zs, ref, tol=tol)
        w0, wp, wm = w[:act.size], w[act.size:2 * act.size], w[2 * act.size:]
        f = w0 - target[act]
        deriv = (wp - wm) / (2.0 * h)
        bad = (~np.isfinite(w0.real)) | (~np.isfinite(deriv.real)) | (deriv == 0)
        conv = ~bad & (np.abs(f) < NEWTON_TOL)
        ok[act[conv]] = True
        wprime[act[~bad]] = deriv[~bad]
        move = ~bad & ~conv
        if move.any():
            step = -f[move] / deriv[move]
            cap = 0.5 * (1.0 + np.abs(za[move]))
            big = np.abs(step) > cap
            step[big] *= cap[big] / np.abs(step[big])
            z[act[move]] = za[move] + step
        dead[act[bad]] = True
    return z, ok, wprime


def _newton_one(chart, z, target, wprime, tol):
    zz, ok, wp = _newton_batch(chart, np.array([z]), np.array([target]),
                               np.array([wprime]), tol)
    return complex(zz[0]), bool(ok[0]), complex(wp[0])


def _find_base_z(chart: UnstableChart) -> complex:
    """A chart parameter whose image lies in V+, anchoring the branch."""
    lam = max(abs(chart.multiplier), 2.0) if chart.period else 2.0
    r = max(chart.rho_val, 1.0)
    for _ in range(60):
        for ang in np.linspace(0.0, 2.0 * np.pi, 16, endpoint=False):
            z = r * np.exp(1j * ang)
            q = eval_chart(chart, z)
            if q.is_finite and in_sector_plus(chart.hmap, q):
                return complex(z)
        r *= lam
    raise ChartDomainError("no chart parameter found with image in V+")


def _chain_to(chart, z, w, target, tol, max_sub=14):
    """Continue a known value (z, w = log phi) toward ``target``.

    The straight segment in log space is subdivided until each Newton solve
    converges.  Returns (z, w', success flag).
    """
    wprime = 1.0 + 0j
    cur = w
    stack = [target]
    depth = 0
    while stack:
        t = stack[-1]
        zn, ok, wprime = _newton_one(chart, z, t, wprime, tol)
        if ok:
            z, cur = zn, t
            stack.pop()
            depth = 0
        else:
            if depth >= max_sub:
                return z, wprime, False
            stack.append(0.5 * (cur + t))
            depth += 1
    return z, wprime, True


def _descend_levels(g_start: float, g_stop: float) -> np.ndarray:
    levels = [g_start]
    while levels[-1] >= g_stop:
        levels.append(0.5 * levels[-1])
    return np.array(levels)


def _trace_from_seeds(chart, thetas, lifts, seeds, wprimes, alive,
                      g_start, g_stop, land_tol, tol):
    """Batched descent of several rays from seeds at level ``g_start``."""
    n = len(thetas)
    levels = _descend_levels(g_start, g_stop)
    samples = [[] for _ in range(n)]
    fail_level = [None] * n
    z = np.array(seeds, dtype=complex)
    wp = np.array(wprimes, dtype=complex)
    active = np.array(alive, dtype=bool)
    for i in range(n):
        if not active[i]:
            fail_level[i] = float(g_start)
    for k, g in enumerate(levels):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        target = np.full(idx.size, g, dtype=complex) + 1j * lifts[idx]
        if k == 0:
            ok = np.ones(idx.size, dtype=bool)
        else:
            z_new, ok, wp_new = _newton_batch(chart, z[idx], target, wp[idx], tol)
            z[idx] = z_new
            wp[idx] = wp_new
        for j, i in enumerate(idx):
            if ok[j]:
                samples[i].append((float(g), complex(z[i])))
            else:
                active[i] = False
                fail_level[i] = float(g)
    traces = []
    for i in range(n):
        pts = [p for _, p in samples[i][-CAUCHY_WINDOW:]]
        diam = 0.0
        for a in range(len(pts)):
            for b in range(a + 1, len(pts)):
                diam = max(diam, abs(pts[a] - pts[b]))
        done = fail_level[i] is None
        landed = done and len(pts) >= 2 and diam < land_tol
        traces.append(RayTrace(
            theta=float(thetas[i]),
            samples=tuple(samples[i]),
            landed=landed,
            endpoint=samples[i][-1][1] if landed else None,
            endpoint_diameter=diam,
            fail_level=fail_level[i],
        ))
    return traces


def _prepare_seeds(chart, thetas, g_start, base_z, tol):
    """Seed each ray at level ``g_start`` on its nearest angle lift.

    Starting from a V+ anchor we first descend the potential at a constant
    argument, then walk along the level curve to each requested lift.  The
    walk visits the lifts in sorted order away from the anchor so every step
    is short.
    """
    hmap = chart.hmap
    if base_z is None:
        base_z = _find_base_z(chart)
    q0 = eval_chart(chart, base_z)
    if not (q0.is_finite and in_sector_plus(hmap, q0)):
        raise NotEscapingError("base_z must be a chart parameter mapping into V+")
    w0, _ = log_bottcher_vplus(hmap, q0, tol=tol)
    thetas = np.asarray(thetas, dtype=float)
    lifts = w0.imag + np.mod(thetas - w0.imag + np.pi, 2.0 * np.pi) - np.pi

    # constant-argument descent to the working level
    z_cur, w_cur = complex(base_z), w0
    n_steps = max(1, int(math.ceil(abs(math.log2(w0.real / g_start)))))
    ok = True
    wp = 1.0 + 0j
    for s in range(1, n_steps + 1):
        g = w0.real * (g_start / w0.real) ** (s / n_steps)
        t = complex(g, w0.imag)
        z_cur, wp, ok = _chain_to(chart, z_cur, w_cur, t, tol)
        if not ok:
            break
        w_cur = t
    if not ok:
        return lifts, np.zeros(thetas.size, complex), \
            np.ones(thetas.size, complex), np.zeros(thetas.size, bool), base_z

    # walk the level curve to each lift, outward from the anchor argument
    seeds = np.zeros(thetas.size, dtype=complex)
    wprimes = np.ones(thetas.size, dtype=complex)
    alive = np.zeros(thetas.size, dtype=bool)
    order = np.argsort(lifts)
    anchor = np.searchsorted(lifts[order], w0.imag)
    max_step = 0.2
    for direction in (1, -1):
        z_w, w_w = z_cur, w_cur
        rng = order[anchor:] if direction == 1 else order[:anchor][::-1]
        stuck = False
        for i in rng:
            if stuck:
                break
            t_im = lifts[i]
            while abs(w_w.imag - t_im) > max_step:
                t = complex(g_start, w_w.imag + math.copysign(max_step, t_im - w_w.imag))
                z_w, _, ok = _chain_to(chart, z_w, w_w, t, tol)
                if not ok:
                    stuck = True
                    break
                w_w = t
            if stuck:
                break
            t = complex(g_start, t_im)
            z_w, wpw, ok = _chain_to(chart, z_w, w_w, t, tol)
            if not ok:
                stuck = True
                break
            w_w = t
            seeds[i], wprimes[i], alive[i] = z_w, wpw, True
    return lifts, seeds, wprimes, alive, base_z


def trace_ray(chart: UnstableChart, theta: float, G_start: float,
              G_stop: float, base_z: Optional[complex] = None,
              land_tol: float = 1e-3, tol: float = 1e-12) -> RayTrace:
    """Trace the external ray of angle ``theta`` down to potential G_stop.

    The trace starts at the chart point where the leaf Bottcher value is
    e^{G_start + i theta} (nearest lift to the anchor) and halves the
    potential level until it drops below ``G_stop``.  Newton divergence at
    some level truncates the trace with ``landed=False``.
    """
    if not (G_start > G_stop > 0.0):
        raise ValueError("need G_start > G_stop > 0")
    lifts, seeds, wprimes, alive, _ = _prepare_seeds(
        chart, [theta], G_start, base_z, tol)
    traces = _trace_from_seeds(chart, np.array([theta]), lifts, seeds,
                               wprimes, alive, G_start, G_stop, land_tol, tol)
    return traces[0]


def landing_stats(chart: UnstableChart, n_rays: int, G_stop: float,
                  land_tol: float, G_start: float = 1.0,
                  base_z: Optional[complex] = None,
                  tol: float = 1e-12) -> LandingReport:
    """Trace ``n_rays`` uniformly spaced rays and report the landed fraction.

    Per-ray failures are counted as not landed; endpoints are listed in
    increasing angle order.
    """
    if n_rays < 16:
        raise ValueError("need at least 16 rays")
    if not (G_start > G_stop > 0.0):
        raise ValueError("need G_start > G_stop > 0")
    thetas = 2.0 * np.pi * np.arange(n_rays) / n_rays
    lifts, seeds, wprimes, alive, _ = _prepare_seeds(
        chart, thetas, G_start, base_z, tol)
    traces = _trace_from_seeds(chart, thetas, lifts, seeds, wprimes, alive,
                               G_start, G_stop, land_tol, tol)
    landed = [t for t in traces if t.landed]
    return LandingReport(
        n_rays=n_rays,
        fraction_landed=len(landed) / float(n_rays),
        endpoints=tuple(t.endpoint for t in landed),
        traces=tuple(traces),
    )


# ---------------------------------------------------------------------------
# solenoid coordinates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolenoidWindow:
    """A finite window of Bottcher values along an orbit.

    ``log_z`` holds log z_j for j in [j_min, j_max]; the values themselves
    may overflow for strongly escaping orbits, so the logs are primary.
    ``residuals`` are the relative defects |z_{j+1} - z_j^d| / |z_j^d|.
    """

    j_min: int
    j_max: int
    log_z: tuple
    residuals: tuple

    @property
    def z(self) -> tuple:
        with np.errstate(over="ignore"):
            return tuple(complex(np.exp(v)) for v in self.log_z)

    def entry(self, j: int) -> complex:
        return self.log_z[j - self.j_min]


def solenoid_coords(hmap: HenonMap, q: PointC2, j_min: int = -6,
                    j_max: int = 6, n_max: int = 400,
                    tol: float = 1e-12) -> SolenoidWindow:
    """Bottcher values z_j along the orbit f^j(q), j in [j_min, j_max].

    Each z_j takes the principal d^n-th root of the Bottcher value at the
    first V+ point along the orbit at or after f^j(q).  The entry search
    walks the stored orbit rather than re-iterating each f^j(q) forward:
    re-running the contracting direction from a backward iterate cancels
    catastrophically and silently lands on a different trajectory.  Points
    already in V+ get independent telescopes, so those residuals remain an
    honest consistency check.  Raises if the orbit does not reach V+ within
    ``n_max`` forward steps past j_max.
    """
    if j_min > 0 or j_max < 0 or j_min > j_max:
        raise ValueError("window must satisfy j_min <= 0 <= j_max")
    orbit = [q]
    p = q
    for _ in range(j_max):
        p = apply_map(hmap, p, "forward")
        if not p.is_finite:
            raise NotEscapingError("forward orbit overflowed before V+")
        orbit.append(p)
    p = q
    for _ in range(-j_min):
        p = apply_map(hmap, p, "backward")
        if not p.is_finite:
            raise NotEscapingError("backward orbit overflowed")
        orbit.insert(0, p)
    # extend past j_max until the orbit is inside V+ (forward invariant)
    while not in_sector_plus(hmap, orbit[-1]):
        p = apply_map(hmap, orbit[-1], "forward")
        if not p.is_finite or len(orbit) - (j_max - j_min + 1) > n_max:
            raise NotEscapingError("not in U+ within budget")
        orbit.append(p)

    d = hmap.degree
    logs = []
    for i in range(j_max - j_min + 1):
        e = i
        while not in_sector_plus(hmap, orbit[e]):
            e += 1
        T, _ = log_bottcher_vplus(hmap, orbit[e], tol=tol)
        logs.append(T / float(d) ** (e - i))
    res = []
    for a, b in zip(logs[:-1], logs[1:]):
        delta = b - d * a
        im = math.remainder(delta.imag, 2.0 * math.pi)
        res.append(abs(np.exp(complex(delta.real, im)) - 1.0))
    return SolenoidWindow(j_min=j_min, j_max=j_max,
                          log_z=tuple(logs), residuals=tuple(res))
