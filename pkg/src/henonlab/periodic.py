"""Periodic orbits: damped Newton search, dedup, and linear classification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_map import HenonMap, PointC2, apply_map, jacobian

#: two orbits closer than this (between canonical representatives) are one
DEDUP_RADIUS = 1e-8

#: modulus margin around 1 below which an eigenvalue is called indeterminate
EIG_MARGIN = 1e-6


@dataclass(frozen=True)
class SaddleOrbit:
    points: tuple[PointC2, ...]
    period: int
    lam_u: complex
    lam_s: complex
    v_u: tuple[complex, complex]
    v_s: tuple[complex, complex]

    @property
    def lyapunov(self) -> float:
        """Expansion rate per map step, log|lam_u| / period."""
        return float(np.log(abs(self.lam_u)) / self.period)


@dataclass(frozen=True)
class Sink:
    points: tuple[PointC2, ...]
    period: int
    eigenvalues: tuple[complex, complex]


@dataclass(frozen=True)
class Source:
    points: tuple[PointC2, ...]
    period: int
    eigenvalues: tuple[complex, complex]


@dataclass(frozen=True)
class Indeterminate:
    points: tuple[PointC2, ...]
    period: int
    eigenvalues: tuple[complex, complex]


def _point_key(q: PointC2):
    return (q.x.real, q.x.imag, q.y.real, q.y.imag)


def _newton_period(hmap: HenonMap, q: PointC2, n: int, max_iter: int = 64):
    """Damped Newton on ``f^n(q) - q``.  Returns the root or None."""
    x = np.array([q.x, q.y], dtype=complex)

    def residual(v):
        img = apply_map(hmap, PointC2(v[0], v[1]), n=n)
        if not img.is_finite:
            return None
        return np.array([img.x - v[0], img.y - v[1]], dtype=complex)

    g = residual(x)
    if g is None:
        return None
    for _ in range(max_iter):
        norm = np.linalg.norm(g)
        if norm < 1e-13 * (1.0 + np.linalg.norm(x)):
            return PointC2(complex(x[0]), complex(x[1]))
        J = jacobian(hmap, PointC2(x[0], x[1]), n=n) - np.eye(2)
        try:
            step = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        for _ in range(20):
            cand = x + lam * step
            gc = residual(cand)
            if gc is not None and np.linalg.norm(gc) < norm:
                x, g = cand, gc
                break
            lam *= 0.5
        else:
            return None
    norm = np.linalg.norm(g)
    if norm < 1e-10 * (1.0 + np.linalg.norm(x)):
        return PointC2(complex(x[0]), complex(x[1]))
    return None


def _canonical_orbit(hmap: HenonMap, q: PointC2, n: int):
    """Orbit of ``q`` under the map, rotated to start at its smallest point.

    The period recorded is the minimal one dividing ``n``.
    """
    orbit = [q]
    cur = q
    for _ in range(n - 1):
        cur = apply_map(hmap, cur)
        orbit.append(cur)
    period = n
    for k in range(1, n):
        if n % k == 0:
            d = max(abs(orbit[k].x - q.x), abs(orbit[k].y - q.y))
            if d < DEDUP_RADIUS:
                period = k
                break
    orbit = orbit[:period]
    start = min(range(period), key=lambda i: _point_key(orbit[i]))
    return tuple(orbit[start:] + orbit[:start]), period


def find_periodic(hmap: HenonMap, n: int, box: float = 5.0, seed_grid: int = 16,
                  max_iter: int = 64) -> list[tuple[tuple[PointC2, ...], int]]:
    """All solutions of ``f^n(q) = q`` found from a deterministic seed cloud.

    Returns a sorted list of ``(orbit_points, minimal_period)``. Lower-period
    orbits (whose period divides n) are included; duplicates are merged when
    canonical representatives are closer than :data:`DEDUP_RADIUS`.
    """
    if n < 1:
        raise ValueError("period must be positive")
    rng = np.random.default_rng(826)
    m = seed_grid * seed_grid
    vals = rng.uniform(-box, box, size=(m, 4))
    seeds = [PointC2(complex(a, b), complex(c, d)) for a, b, c, d in vals]
    # the diagonal catches fixed points of single-factor maps exactly
    diag = np.linspace(-box, box, seed_grid)
    seeds += [PointC2(complex(t), complex(t)) for t in diag]
    found: list[tuple[tuple[PointC2, ...], int]] = []
    for s in seeds:
        root = _newton_period(hmap, s, n, max_iter=max_iter)
        if root is None:
            continue
        orbit, period = _canonical_orbit(hmap, root, n)
        is_new = True
        for other, operiod in found:
            if operiod != period:
                continue
            # orbits are equal as point sets; the canonical representative
            # can flip under 1e-16 ties, so compare set against set
            rep = orbit[0]
            if any(max(abs(o.x - rep.x), abs(o.y - rep.y)) < DEDUP_RADIUS for o in other):
                is_new = False
                break
        if is_new:
            found.append((orbit, period))
    found.sort(key=lambda item: _point_key(item[0][0]))
    return found


def _fix_phase(v: np.ndarray) -> tuple[complex, complex]:
    """Scale a unit vector so its first nonzero component is positive real."""
    v = v / np.linalg.norm(v)
    for comp in v:
        if abs(comp) > 1e-14:
            v = v * (abs(comp) / comp)
            break
    return (complex(v[0]), complex(v[1]))


def classify(hmap: HenonMap, orbit: tuple[PointC2, ...], n: int | None = None):
    """Linear type of a periodic orbit from the eigenvalues of ``Df^n``.

    ``n`` defaults to the orbit length.  Any eigenvalue within
    :data:`EIG_MARGIN` of the unit circle makes the orbit
    :class:`Indeterminate`.
    """
    if n is None:
        n = len(orbit)
    p = orbit[0]
    J = jacobian(hmap, p, n=n)
    eigvals, eigvecs = np.linalg.eig(J)
    order = np.argsort(np.abs(eigvals))
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    mods = np.abs(eigvals)
    if any(abs(m - 1.0) <= EIG_MARGIN for m in mods):
        return Indeterminate(tuple(orbit), n, (complex(eigvals[0]), complex(eigvals[1])))
    if mods[1] < 1.0:
        return Sink(tuple(orbit), n, (complex(eigvals[0]), complex(eigvals[1])))
    if mods[0] > 1.0:
        return Source(tuple(orbit), n, (complex(eigvals[0]), complex(eigvals[1])))
    return SaddleOrbit(
        points=tuple(orbit),
        period=n,
        lam_u=complex(eigvals[1]),
        lam_s=complex(eigvals[0]),
        v_u=_fix_phase(eigvecs[:, 1]),
        v_s=_fix_phase(eigvecs[:, 0]),
    )


def find_saddles(hmap: HenonMap, n: int, box: float = 5.0,
                 seed_grid: int = 16) -> list[SaddleOrbit]:
    """Convenience wrapper: the saddle orbits among ``f^n(q) = q`` solutions."""
    out = []
    for orbit, period in find_periodic(hmap, n, box=box, seed_grid=seed_grid):
        c = classify(hmap, orbit, n=period)
        if isinstance(c, SaddleOrbit):
            out.append(c)
    return out
