"""Parametrized invariant-manifold charts and leafwise potential theory.

A chart is an entire map ``psi : C -> C^2`` onto the unstable manifold of a
saddle ``p`` with ``F(psi(z)) = psi(lam * z)`` where ``F`` is the map iterated
over the orbit period and ``lam`` the unstable multiplier.  Coefficients are
found order by order from the homological equation

    (DF_p - lam^k I) c_k = -(lower order terms),

which is solvable for all k >= 2 because ``|lam^k| > |lam|`` keeps the matrix
away from the spectrum; a near-singular matrix is reported as a resonance.

Inside the reliable radius the series is summed directly, outside it the
conjugacy is used backwards: ``psi(z) = F^k(psi(z / lam^k))``.

Stable manifolds are the same construction run on the inverse map
(``direction="backward"``); their leaf potential is the backward one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core_map import HenonMap, PointC2, jacobian, step_arrays
from .errors import (
    BranchAmbiguityError,
    ChartDomainError,
    LoopMarginError,
    NotEscapingError,
    PathEscapesError,
    ResonanceError,
)
from .periodic import SaddleOrbit
from .potential import _sector_data, _telescope, green_many

#: cond(DF_p - lam^k I) above this aborts the series solve
RESONANCE_COND_LIMIT = 1e12

#: coefficient tail must fall below this at the reliable radius
TAIL_EPS = 1e-16


@dataclass(frozen=True)
class UnstableChart:
    hmap: HenonMap
    base: PointC2
    period: int
    direction: str                 # "forward": unstable, "backward": stable
    multiplier: complex
    coeff_x: np.ndarray
    coeff_y: np.ndarray
    rho_val: float
    alpha: float = 1.0             # accumulated normalization rescale

    @property
    def n_series(self) -> int:
        return len(self.coeff_x) - 1

    @property
    def side(self) -> str:
        return "plus" if self.direction == "forward" else "minus"


def _series_mul(a: np.ndarray, b: np.ndarray, L: int) -> np.ndarray:
    return np.convolve(a, b)[:L]


def _poly_series(poly, Y: np.ndarray, L: int) -> np.ndarray:
    acc = np.zeros(L, dtype=complex)
    acc[0] = 1.0
    for c in reversed(poly.lower):
        acc = _series_mul(acc, Y, L)
        acc[0] += c
    return acc


def _map_step_series(hmap: HenonMap, X: np.ndarray, Y: np.ndarray,
                     direction: str, L: int):
    if direction == "forward":
        for fac in hmap.factors:
            X, Y = Y, _poly_series(fac.poly, Y, L) - fac.a * X
    else:
        for fac in reversed(hmap.factors):
            X, Y = (_poly_series(fac.poly, X, L) - Y) / fac.a, X
    return X, Y


def _tail_radius(coeff_x: np.ndarray, coeff_y: np.ndarray) -> float:
    n = len(coeff_x) - 1
    rho = math.inf
    for k in range(max(2, n // 2), n + 1):
        c = max(abs(coeff_x[k]), abs(coeff_y[k]))
        if c > 1e-300:
            rho = min(rho, (TAIL_EPS / c) ** (1.0 / k))
    if not math.isfinite(rho):
        rho = 1.0
    return float(rho)


def solve_chart(hmap: HenonMap, saddle: SaddleOrbit, n_series: int = 60,
                direction: str = "forward") -> UnstableChart:
    """Series chart of the unstable (or, backward, stable) manifold."""
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    p = saddle.points[0]
    n = saddle.period
    if direction == "forward":
        lam, v = saddle.lam_u, saddle.v_u
    else:
        lam, v = 1.0 / saddle.lam_s, saddle.v_s
    X = np.zeros(n_series + 1, dtype=complex)
    Y = np.zeros(n_series + 1, dtype=complex)
    X[0], Y[0] = p.x, p.y
    X[1], Y[1] = v
    A = jacobian(hmap, p, n=n, direction=direction)
    eye = np.eye(2)
    for k in range(2, n_series + 1):
        L = k + 1
        FX, FY = X[:L].copy(), Y[:L].copy()
        for _ in range(n):
            FX, FY = _map_step_series(hmap, FX, FY, direction, L)
        M = A - (lam ** k) * eye
        if np.linalg.cond(M) > RESONANCE_COND_LIMIT:
            raise ResonanceError(
                f"homological equation ill conditioned at order {k} "
                f"(multiplier {lam!r})"
            )
        X[k], Y[k] = np.linalg.solve(M, [-FX[k], -FY[k]])
    chart = UnstableChart(
        hmap=hmap, base=p, period=n, direction=direction,
        multiplier=complex(lam), coeff_x=X, coeff_y=Y,
        rho_val=_tail_radius(X, Y),
    )
    # the coefficient-tail estimate can be fooled by rounding noise in the
    # highest orders; shrink until the conjugacy defect on the advertised
    # domain is at series accuracy
    for _ in range(40):
        if chart_residual(chart, frac=0.9) < 1e-9:
            break
        chart = replace(chart, rho_val=chart.rho_val / 1.5)
    return chart


def _rescale_depth(chart: UnstableChart, az: np.ndarray) -> np.ndarray:
    """Number of conjugacy pullbacks needed to land inside rho_val."""
    k = np.zeros(az.shape, dtype=np.int64)
    out = az > chart.rho_val
    if out.any():
        k[out] = np.ceil(
            np.log(az[out] / chart.rho_val) / math.log(abs(chart.multiplier))
        ).astype(np.int64)
    return k


def eval_chart_many(chart: UnstableChart, z: np.ndarray):
    """Chart points for an array of parameters; returns (x, y) arrays."""
    z = np.asarray(z, dtype=complex).ravel()
    k = _rescale_depth(chart, np.abs(z))
    w = z * chart.multiplier ** (-k.astype(float))
    x = np.polyval(chart.coeff_x[::-1], w)
    y = np.polyval(chart.coeff_y[::-1], w)
    kmax = int(k.max()) if k.size else 0
    with np.errstate(all="ignore"):
        for i in range(kmax):
            m = k > i
            xm, ym = x[m], y[m]
            for _ in range(chart.period):
                xm, ym = step_arrays(chart.hmap, xm, ym, chart.direction)
            x[m], y[m] = xm, ym
    return x, y


def eval_chart(chart: UnstableChart, z: complex) -> PointC2:
    x, y = eval_chart_many(chart, np.array([z]))
    return PointC2(complex(x[0]), complex(y[0]))


def leaf_green_many(chart: UnstableChart, z: np.ndarray,
                    tol: float = 1e-12, n_max: int = 200):
    """Leaf restriction of the potential, via the conjugacy rescaling.

    Returns ``(value, err, status, n_pre)`` as in ``green_many``; values for
    pulled-back parameters are scaled by ``d**(period*k)`` instead of
    evaluating the (possibly astronomically large) far point directly.
    """
    z = np.asarray(z, dtype=complex).ravel()
    k = _rescale_depth(chart, np.abs(z))
    w = z * chart.multiplier ** (-k.astype(float))
    x = np.polyval(chart.coeff_x[::-1], w)
    y = np.polyval(chart.coeff_y[::-1], w)
    value, err, status, n_pre = green_many(
        chart.hmap, x, y, side=chart.side, tol=tol, n_max=n_max
    )
    scale = np.power(float(chart.hmap.degree), (chart.period * k).astype(float))
    return value * scale, err * scale, status, n_pre


def leaf_green(chart: UnstableChart, z: complex,
               tol: float = 1e-12, n_max: int = 200):
    value, err, status, _ = leaf_green_many(chart, np.array([z]), tol=tol, n_max=n_max)
    return float(value[0]), float(err[0]), int(status[0])


def max_modulus(chart: UnstableChart, r: float, n_samples: int = 1024,
                refine: bool = True, tol: float = 1e-12, n_max: int = 200) -> float:
    """Maximum of the leaf potential on the circle ``|z| = r``.

    Sampled maximum over equispaced angles, optionally sharpened by a
    golden-section pass around the best sample.
    """
    theta = 2.0 * np.pi * np.arange(n_samples) / n_samples
    z = r * np.exp(1j * theta)
    value, _, _, _ = leaf_green_many(chart, z, tol=tol, n_max=n_max)
    i = int(np.argmax(value))
    best = float(value[i])
    if not refine:
        return best
    span = 2.0 * np.pi / n_samples
    lo, hi = theta[i] - span, theta[i] + span

    def g(t: float) -> float:
        v, _, _, _ = leaf_green_many(chart, np.array([r * np.exp(1j * t)]),
                                     tol=tol, n_max=n_max)
        return float(v[0])

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(40):
        if gc > gd:
            b, d, gd = d, c, gc
            c = b - invphi * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + invphi * (b - a)
            gd = g(d)
    return max(best, gc, gd)


def normalize_chart(chart: UnstableChart, n_samples: int = 512,
                    tol: float = 1e-12, n_max: int = 200) -> UnstableChart:
    """Rescale the parameter so the unit circle maximum of the potential is 1."""

    def m(s: float) -> float:
        return max_modulus(chart, s, n_samples=n_samples, refine=False,
                           tol=tol, n_max=n_max)

    lo = hi = 1.0
    if m(1.0) < 1.0:
        for _ in range(80):
            hi *= 2.0
            if m(hi) >= 1.0:
                break
        else:
            raise NotEscapingError("leaf potential never reaches 1; chart sees no escape")
        lo = hi / 2.0
    else:
        for _ in range(200):
            lo /= 2.0
            if m(lo) < 1.0:
                break
        else:
            raise ChartDomainError("leaf potential stuck above 1 near the saddle")
        hi = lo * 2.0
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if m(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    alpha = math.sqrt(lo * hi)
    powers = alpha ** np.arange(chart.n_series + 1, dtype=float)
    return replace(
        chart,
        coeff_x=chart.coeff_x * powers,
        coeff_y=chart.coeff_y * powers,
        rho_val=chart.rho_val / alpha,
        alpha=chart.alpha * alpha,
    )


def chart_residual(chart: UnstableChart, n_pts: int = 64, frac: float = 0.9) -> float:
    """Max conjugacy defect ``|F(psi(z)) - psi(lam z)|`` on a test circle."""
    z = frac * chart.rho_val * np.exp(2j * np.pi * np.arange(n_pts) / n_pts)
    x, y = eval_chart_many(chart, z)
    for _ in range(chart.period):
        x, y = step_arrays(chart.hmap, x, y, chart.direction)
    x2, y2 = eval_chart_many(chart, chart.multiplier * z)
    return float(np.max(np.hypot(np.abs(x - x2), np.abs(y - y2))))


# ---------------------------------------------------------------------------
# leafwise Bottcher coordinate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BottcherValue:
    value: complex
    log: complex


def _log_leaf_bottcher_many(chart: UnstableChart, z: np.ndarray,
                            ref_im: np.ndarray, tol: float = 1e-12,
                            depth_max: int = 120):
    """Complex log of the Bottcher coordinate along the leaf, vectorized.

    ``ref_im`` is the expected imaginary part at each point; it selects the
    root branch after the functional-equation descent.  Points whose branch
    selection is ambiguous (fractional part near 1/2) or which do not escape
    come back as NaN.
    """
    if chart.direction != "forward":
        raise ChartDomainError("leaf Bottcher coordinate only exists on unstable charts")
    hmap = chart.hmap
    d = float(hmap.degree)
    _, deep, _ = _sector_data(hmap, "plus")
    z = np.asarray(z, dtype=complex).ravel()
    ref_im = np.asarray(ref_im, dtype=float).ravel()
    k = _rescale_depth(chart, np.abs(z))
    w = z * chart.multiplier ** (-k.astype(float))
    x = np.polyval(chart.coeff_x[::-1], w)
    y = np.polyval(chart.coeff_y[::-1], w)
    n = z.size
    out = np.full(n, np.nan + 1j * np.nan, dtype=complex)
    j = np.zeros(n, dtype=np.int64)
    alive = np.arange(n)
    with np.errstate(all="ignore"):
        for step in range(depth_max + 1):
            ax, ay = np.abs(x), np.abs(y)
            ok = np.isfinite(ax) & np.isfinite(ay)
            entered = ok & (ay > ax) & (ay > deep)
            if entered.any():
                idx = alive[entered]
                T, _ = _telescope(hmap, y[entered], x[entered], "plus", tol)
                # h(z) = (T + 2*pi*i*s) * d**(period*k - j); pick s from ref_im
                expo = (chart.period * k[idx] - j[idx]).astype(float)
                up = np.power(d, -expo)          # d**(j - period*k)
                frac = (ref_im[idx] * up - T.imag) / (2.0 * np.pi)
                s = np.round(frac)
                good = np.abs(frac - s) < 0.45
                vals = (T + 2j * np.pi * s) * np.power(d, expo)
                vals[~good] = np.nan + 1j * np.nan
                out[idx] = vals
                keep = ~entered
                alive, x, y, = alive[keep], x[keep], y[keep]
            if alive.size == 0 or step == depth_max:
                break
            x, y = step_arrays(hmap, x, y, "forward")
            j[alive] += 1
    return out


def _log_leaf_bottcher(chart: UnstableChart, z: complex, ref_im: float,
                       tol: float = 1e-12) -> complex:
    out = _log_leaf_bottcher_many(chart, np.array([z]),
                                  np.array([ref_im]), tol=tol)
    v = complex(out[0])
    if math.isnan(v.real):
        raise BranchAmbiguityError(
            f"could not resolve the Bottcher branch at z = {z!r}"
        )
    return v


def leaf_bottcher(chart: UnstableChart, z: complex, base_z: complex,
                  tol: float = 1e-12, max_step: float = 0.25,
                  max_depth: int = 40) -> BottcherValue:
    """Analytic continuation of ``phi+ o psi`` from ``base_z`` to ``z``.

    The chart point of ``base_z`` must lie in V+, which anchors the branch.
    The straight segment is subdivided adaptively until consecutive log
    values move by less than ``max_step``.
    """
    from .potential import in_sector_plus, log_bottcher_vplus

    q0 = eval_chart(chart, base_z)
    if not in_sector_plus(chart.hmap, q0):
        raise NotEscapingError("base_z must be a chart parameter mapping into V+")
    cur_log, _ = log_bottcher_vplus(chart.hmap, q0, tol=tol)
    cur_z = base_z
    pending = [z]
    depth = 0
    while pending:
        target = pending[-1]
        try:
            nxt = _log_leaf_bottcher(chart, target, cur_log.imag, tol=tol)
            ok = abs(nxt - cur_log) <= max_step
        except BranchAmbiguityError:
            ok = False
            nxt = None
        if ok:
            cur_z, cur_log = target, nxt
            pending.pop()
            depth = 0
        else:
            mid = 0.5 * (cur_z + target)
            if abs(target - cur_z) < 1e-13 * (1.0 + abs(target)) or depth >= max_depth:
                g, _, status = leaf_green(chart, target, tol=tol)
                if status != 0 or g <= 0.0:
                    raise PathEscapesError(
                        f"continuation path hits the zero set of the potential near {target!r}"
                    )
                raise BranchAmbiguityError(
                    f"branch tracking stalled between {cur_z!r} and {target!r}"
                )
            pending.append(mid)
            depth += 1
    return BottcherValue(value=complex(np.exp(cur_log)), log=cur_log)


# ---------------------------------------------------------------------------
# loop charge
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LoopCharge:
    value: float
    n_samples: int
    loop: tuple


def _loop_samples(loop, n: int):
    """Sample points, outward normals and arc elements of a closed loop."""
    if isinstance(loop, tuple) and len(loop) == 3 and loop[0] == "circle":
        _, center, radius = loop
        t = 2.0 * np.pi * np.arange(n) / n
        nu = np.exp(1j * t)
        pts = complex(center) + radius * nu
        ds = np.full(n, 2.0 * np.pi * radius / n)
        return pts, nu, ds
    verts = np.asarray(loop, dtype=complex).ravel()
    if verts.size < 3:
        raise ValueError("polygon loop needs at least 3 vertices")
    edges = np.roll(verts, -1) - verts
    lens = np.abs(edges)
    per = float(lens.sum())
    pts_list, nu_list, ds_list = [], [], []
    for v, e, l in zip(verts, edges, lens):
        m = max(2, int(round(n * l / per)))
        t = (np.arange(m) + 0.5) / m
        pts_list.append(v + t * e)
        tau = e / l
        nu_list.append(np.full(m, -1j * tau))
        ds_list.append(np.full(m, l / m))
    return (np.concatenate(pts_list), np.concatenate(nu_list),
            np.concatenate(ds_list))


def loop_charge(chart: UnstableChart, loop, tol: float = 1e-12,
                n_start: int = 512, n_cap: int = 8192,
                fd_frac: float = 1e-4, n_max: int = 200) -> LoopCharge:
    """Normalized flux of the leaf potential through a closed loop.

    Computes ``(1/2pi)`` times the integral of the outward normal derivative
    of ``G o psi`` along the loop by central differences, doubling the sample
    count until the value settles.  This is the harmonic measure of the part
    of the bounded set enclosed by the loop: nonnegative, and zero when the
    loop bounds a disk free of it.
    """
    # margin: the loop must stay away from the zero set
    probe_pts, _, _ = _loop_samples(loop, 64)
    g, gerr, status, _ = leaf_green_many(chart, probe_pts, tol=tol, n_max=n_max)
    if (status != 0).any() or g.min() <= 10.0 * tol:
        raise LoopMarginError(
            f"loop touches the zero set of the potential (min G = {g.min():.3g})"
        )
    scale = float(np.max(np.abs(probe_pts - probe_pts.mean())))
    h = fd_frac * scale
    prev = None
    n = n_start
    while True:
        pts, nu, ds = _loop_samples(loop, n)
        up, _, st1, _ = leaf_green_many(chart, pts + h * nu, tol=tol, n_max=n_max)
        um, _, st2, _ = leaf_green_many(chart, pts - h * nu, tol=tol, n_max=n_max)
        if (st1 != 0).any() or (st2 != 0).any():
            raise LoopMarginError("finite-difference probes left the escaping set")
        val = float(np.sum((up - um) / (2.0 * h) * ds) / (2.0 * np.pi))
        if prev is not None and abs(val - prev) < 2e-7:
            return LoopCharge(value=val, n_samples=n, loop=_loop_tag(loop))
        if n >= n_cap:
            return LoopCharge(value=val, n_samples=n, loop=_loop_tag(loop))
        prev = val
        n *= 2


def _loop_tag(loop) -> tuple:
    if isinstance(loop, tuple) and len(loop) == 3 and loop[0] == "circle":
        return ("circle", complex(loop[1]), float(loop[2]))
    return ("polygon", len(np.asarray(loop).ravel()))
