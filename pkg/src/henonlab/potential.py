"""Escape-rate potentials G+/G- and the Bottcher coordinate on V+.

The forward potential is evaluated by iterating a point into the absorbing
sector ``V+ = {|y| > max(|x|, R)}`` and then summing the telescoping series

    G+(q) = d^{-n} * ( log|y_0| + sum_k d^{-(k+1)} log(|y_{k+1}| / |y_k|^d) )

where ``n`` counts the pre-iterates needed to reach the sector and ``y_k``
are the sector iterates.  All sector arithmetic happens on complex
logarithms, so the doubly-exponential growth of the orbit never overflows.
Keeping the imaginary parts gives the Bottcher coordinate for free:
``phi+ = exp(T)`` with ``T`` the same series on full complex logs.

The backward potential reuses the machinery with the roles of x and y
swapped.  Its per-step log ratio tends to a nonzero constant (the factor
coefficients ``a_j`` enter once per step), so the tail of the series is
summed in closed form instead of being truncated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core_map import OVERFLOW_LIMIT, HenonMap, PointC2, step_arrays
from .errors import NotEscapingError


@dataclass(frozen=True)
class GreenValue:
    """A potential value with a rigorous tail bound.

    ``value`` is 0 by convention for orbits the budget classified bounded
    (then ``err`` is 0 too) and for undetermined orbits (then ``err`` is
    infinite).  ``steps`` is the number of pre-iterates spent before the
    sector was reached, or -1 when it never was.
    """

    value: float
    err: float
    side: str
    steps: int

    @property
    def escaped(self) -> bool:
        return self.steps >= 0


@lru_cache(maxsize=None)
def _sector_data(hmap: HenonMap, side: str):
    if side == "plus":
        S = sum(f.poly.coeff_norm() + abs(f.a) for f in hmap.factors)
    else:
        S = sum(f.poly.coeff_norm() + 1.0 for f in hmap.factors)
    enter = max(hmap.radius, 2.0 * S, 2.0)
    # Asymptotic per-step log ratio of the escaping coordinate.  Zero for the
    # forward side (the factors are monic); for the backward side each factor
    # inverse divides by its a_j once per step.
    K = 0.0 + 0.0j
    if side == "minus":
        for fac in reversed(hmap.factors):
            K = fac.poly.degree * K - np.log(complex(fac.a))
    return S, enter, complex(K)


def _to_sector(hmap: HenonMap, x: np.ndarray, y: np.ndarray, side: str, n_max: int):
    """Iterate until the absorbing sector (deep enough for the series).

    Returns ``(status, n_pre, ue, ve)`` where status is 0 escaped, 1 bounded,
    2 undetermined, and ``(ue, ve)`` are the coordinates at sector entry in
    the (escaping, other) order.
    """
    R = hmap.radius
    _, thresh, _ = _sector_data(hmap, side)
    direction = "forward" if side == "plus" else "backward"
    n = x.size
    status = np.full(n, 2, dtype=np.int8)
    n_pre = np.full(n, -1, dtype=np.int64)
    ue = np.zeros(n, dtype=complex)
    ve = np.zeros(n, dtype=complex)
    alive = np.arange(n)
    cx = np.array(x, dtype=complex).ravel().copy()
    cy = np.array(y, dtype=complex).ravel().copy()
    with np.errstate(all="ignore"):
        for step in range(n_max + 1):
            ax, ay = np.abs(cx), np.abs(cy)
            if side == "plus":
                dom, mag = ay > ax, ay
            else:
                dom, mag = ax > ay, ax
            finite = np.isfinite(ax) & np.isfinite(ay)
            enter = finite & dom & (mag > thresh)
            huge = finite & (np.maximum(ax, ay) > OVERFLOW_LIMIT)
            enter |= huge & dom
            dead = (~finite) | (huge & ~dom)
            dead &= ~enter
            take = enter | dead
            if take.any():
                hit = alive[enter]
                status[hit] = 0
                n_pre[hit] = step
                if side == "plus":
                    ue[hit], ve[hit] = cy[enter], cx[enter]
                else:
                    ue[hit], ve[hit] = cx[enter], cy[enter]
                keep = ~take
                alive, cx, cy = alive[keep], cx[keep], cy[keep]
            if alive.size == 0 or step == n_max:
                break
            cx, cy = step_arrays(hmap, cx, cy, direction)
        if alive.size:
            inside = np.maximum(np.abs(cx), np.abs(cy)) <= R
            status[alive[inside]] = 1
    return status, n_pre, ue, ve


def _telescope(hmap: HenonMap, ue: np.ndarray, ve: np.ndarray, side: str,
               tol: float, kmax: int = 256):
    """Sum the sector series on complex logs.  Returns ``(T, err)`` arrays.

    ``T`` is the full complex log of the Bottcher coordinate at the entry
    point; its real part is the potential there (no pre-iterate rescaling).
    """
    S, _, K = _sector_data(hmap, side)
    d = float(hmap.degree)
    n = ue.size
    T = np.empty(n, dtype=complex)
    err = np.zeros(n, dtype=float)
    with np.errstate(all="ignore"):
        Lu = np.log(ue.astype(complex))
        Lv = np.log(ve.astype(complex))
        T[:] = Lu
        alive = np.arange(n)
        w = 1.0  # d^{-k}
        for k in range(kmax):
            mag = np.exp(Lu.real)
            bound = 8.0 * S * w / ((d - 1.0) * mag)
            stop = bound < tol
            if stop.any():
                idx = alive[stop]
                err[idx] = bound[stop]
                T[idx] += K * w / (d - 1.0)
                keep = ~stop
                alive, Lu, Lv = alive[keep], Lu[keep], Lv[keep]
            if alive.size == 0:
                break
            Lu_old = Lu
            if side == "plus":
                for fac in hmap.factors:
                    dj = fac.poly.degree
                    ratio = np.ones_like(Lu)
                    for kk, c in enumerate(fac.poly.lower):
                        if c != 0:
                            ratio += c * np.exp((kk - dj) * Lu)
                    ratio -= fac.a * np.exp(Lv - dj * Lu)
                    Lu, Lv = dj * Lu + np.log(ratio), Lu
            else:
                for fac in reversed(hmap.factors):
                    dj = fac.poly.degree
                    ratio = np.ones_like(Lu)
                    for kk, c in enumerate(fac.poly.lower):
                        if c != 0:
                            ratio += c * np.exp((kk - dj) * Lu)
                    ratio -= np.exp(Lv - dj * Lu)
                    Lu, Lv = dj * Lu + np.log(ratio) - np.log(complex(fac.a)), Lu
            w /= d
            T[alive] += w * (Lu - d * Lu_old)
        if alive.size:
            # budget ran out; report the current bound honestly
            mag = np.exp(Lu.real)
            err[alive] = 8.0 * S * w / ((d - 1.0) * mag)
            T[alive] += K * w / (d - 1.0)
    return T, err


def green_many(hmap: HenonMap, x: np.ndarray, y: np.ndarray, side: str = "plus",
               tol: float = 1e-12, n_max: int = 200):
    """Vector potential evaluation.

    Returns ``(value, err, status, n_pre)`` arrays with status 0 escaped,
    1 bounded (value 0, err 0 by convention), 2 undetermined (value 0,
    err inf).
    """
    if side not in ("plus", "minus"):
        raise ValueError(f"unknown side {side!r}")
    x = np.asarray(x, dtype=complex).ravel()
    y = np.asarray(y, dtype=complex).ravel()
    status, n_pre, ue, ve = _to_sector(hmap, x, y, side, n_max)
    value = np.zeros(x.size, dtype=float)
    err = np.zeros(x.size, dtype=float)
    esc = status == 0
    err[status == 2] = np.inf
    if esc.any():
        T, terr = _telescope(hmap, ue[esc], ve[esc], side, tol)
        scale = np.power(float(hmap.degree), -n_pre[esc].astype(float))
        value[esc] = T.real * scale
        err[esc] = terr * scale
    return value, err, status, n_pre


def green(hmap: HenonMap, q: PointC2, side: str = "plus",
          tol: float = 1e-12, n_max: int = 200) -> GreenValue:
    """Potential of a single point with a tail bound on the error."""
    value, err, status, n_pre = green_many(
        hmap, np.array([q.x]), np.array([q.y]), side=side, tol=tol, n_max=n_max
    )
    steps = int(n_pre[0]) if status[0] == 0 else -1
    return GreenValue(value=float(value[0]), err=float(err[0]), side=side, steps=steps)


def in_sector_plus(hmap: HenonMap, q: PointC2) -> bool:
    return abs(q.y) > max(abs(q.x), hmap.radius)


def log_bottcher_vplus(hmap: HenonMap, q: PointC2, tol: float = 1e-12) -> tuple[complex, float]:
    """Complex log of the Bottcher coordinate of a point of V+.

    The branch is the one obtained from the principal logarithm of the start
    value and principal logs of the (near-1) step ratios, which matches the
    ``phi+ ~ y`` normalization at infinity.
    """
    if not in_sector_plus(hmap, q):
        raise NotEscapingError(
            f"point ({q.x!r}, {q.y!r}) is outside V+ at radius {hmap.radius:.6g}"
        )
    T, err = _telescope(hmap, np.array([q.y], dtype=complex),
                        np.array([q.x], dtype=complex), "plus", tol)
    return complex(T[0]), float(err[0])


def bottcher_vplus(hmap: HenonMap, q: PointC2, tol: float = 1e-12) -> complex:
    """Bottcher coordinate on V+; satisfies ``phi+(f(q)) = phi+(q)**d``."""
    T, _ = log_bottcher_vplus(hmap, q, tol=tol)
    return complex(np.exp(T))


def log_bottcher_vplus_many(hmap: HenonMap, x: np.ndarray, y: np.ndarray,
                            tol: float = 1e-12):
    """Vector form of :func:`log_bottcher_vplus`; assumes all points in V+."""
    T, err = _telescope(hmap, np.asarray(y, dtype=complex).ravel(),
                        np.asarray(x, dtype=complex).ravel(), "plus", tol)
    return T, err
