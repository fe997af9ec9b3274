"""Composed Henon maps in normal form, with the filtration used everywhere else.

A map is a composition ``f = f_1 o f_2 o ... o f_m`` of factors

    f_j(x, y) = (y, p_j(y) - a_j * x),

where ``p_j`` is monic of degree ``d_j >= 2`` and ``a_j != 0``.  The composed
degree is ``d = d_1 * ... * d_m`` and the (constant) Jacobian determinant is
the product of the ``a_j``.

The module also certifies an escape radius ``R``: outside the bidisk of
radius ``R``, the sectors ``V+ = {|y| > max(|x|, R)}`` and
``V- = {|x| > max(|y|, R)}`` absorb forward respectively backward orbits, and
the escaping coordinate at least doubles per factor.  That certificate is
what the potential-theory code relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache, cached_property

import numpy as np

from .errors import MapDefinitionError

#: Magnitudes past this are treated as escaped without further arithmetic.
OVERFLOW_LIMIT = 1e150


@dataclass(frozen=True)
class MonicPolynomial:
    """A monic one-variable polynomial, stored by its sub-leading coefficients.

    ``lower[k]`` is the coefficient of ``y**k`` for ``k = 0 .. degree-1``;
    the leading coefficient is implicitly 1.
    """

    lower: tuple[complex, ...]

    def __post_init__(self):
        if len(self.lower) < 2:
            raise MapDefinitionError("factor polynomial must have degree >= 2")
        object.__setattr__(self, "lower", tuple(complex(c) for c in self.lower))

    @property
    def degree(self) -> int:
        return len(self.lower)

    @cached_property
    def descending(self) -> tuple[complex, ...]:
        """Coefficients in ``np.polyval`` order, leading 1 first."""
        return (1.0 + 0.0j,) + tuple(reversed(self.lower))

    @cached_property
    def deriv_descending(self) -> tuple[complex, ...]:
        d = self.degree
        return tuple((d - k) * c for k, c in enumerate(self.descending[:-1]))

    def __call__(self, y):
        if isinstance(y, np.ndarray):
            return np.polyval(np.asarray(self.descending), y)
        acc = 1.0 + 0.0j
        for c in reversed(self.lower):
            acc = acc * y + c
        return acc

    def deriv(self, y):
        if isinstance(y, np.ndarray):
            return np.polyval(np.asarray(self.deriv_descending), y)
        acc = 0j
        for c in self.deriv_descending:
            acc = acc * y + c
        return acc

    def coeff_norm(self) -> float:
        """Sum of the absolute values of the sub-leading coefficients."""
        return float(sum(abs(c) for c in self.lower))


@dataclass(frozen=True)
class HenonFactor:
    poly: MonicPolynomial
    a: complex

    def __post_init__(self):
        object.__setattr__(self, "a", complex(self.a))
        if self.a == 0:
            raise MapDefinitionError("factor coefficient a must be nonzero")


@dataclass(frozen=True)
class PointC2:
    x: complex
    y: complex

    def __post_init__(self):
        object.__setattr__(self, "x", complex(self.x))
        object.__setattr__(self, "y", complex(self.y))

    @property
    def is_finite(self) -> bool:
        return (
            math.isfinite(self.x.real)
            and math.isfinite(self.x.imag)
            and math.isfinite(self.y.real)
            and math.isfinite(self.y.imag)
        )

    def as_tuple(self) -> tuple[complex, complex]:
        return (self.x, self.y)


@dataclass(frozen=True)
class HenonMap:
    factors: tuple[HenonFactor, ...]

    def __post_init__(self):
        if not self.factors:
            raise MapDefinitionError("a map needs at least one factor")
        object.__setattr__(self, "factors", tuple(self.factors))

    @cached_property
    def degree(self) -> int:
        d = 1
        for f in self.factors:
            d *= f.poly.degree
        return d

    @cached_property
    def jac(self) -> complex:
        """Constant Jacobian determinant of the composition."""
        j = 1.0 + 0.0j
        for f in self.factors:
            j *= f.a
        return j

    @cached_property
    def radius(self) -> float:
        return escape_radius(self)[0]

    def apply(self, q: PointC2, direction: str = "forward", n: int = 1) -> PointC2:
        return apply_map(self, q, direction=direction, n=n)

    def jacobian(self, q: PointC2, n: int = 1, direction: str = "forward") -> np.ndarray:
        return jacobian(self, q, n=n, direction=direction)


def make_henon(factors) -> HenonMap:
    """Build a composed map from ``(lower_coeffs, a)`` pairs or factors."""
    out = []
    for item in factors:
        if isinstance(item, HenonFactor):
            out.append(item)
        else:
            lower, a = item
            out.append(HenonFactor(MonicPolynomial(tuple(lower)), a))
    return HenonMap(tuple(out))


def _clip_inf(z: complex) -> complex:
    if abs(z.real) > OVERFLOW_LIMIT or abs(z.imag) > OVERFLOW_LIMIT:
        return complex(math.inf, math.inf)
    return z


def apply_map(hmap: HenonMap, q: PointC2, direction: str = "forward", n: int = 1) -> PointC2:
    """Apply the composed map (or its inverse) ``n`` times.

    Overflow past :data:`OVERFLOW_LIMIT` short-circuits: the returned point
    carries infinite components and callers treat it as escaped.
    """
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    x, y = q.x, q.y
    for _ in range(n):
        if max(abs(x), abs(y)) > OVERFLOW_LIMIT:
            return PointC2(complex(math.inf, math.inf), complex(math.inf, math.inf))
        if direction == "forward":
            for fac in hmap.factors:
                x, y = y, fac.poly(y) - fac.a * x
        else:
            for fac in reversed(hmap.factors):
                x, y = (fac.poly(x) - y) / fac.a, x
        x, y = _clip_inf(x), _clip_inf(y)
        if not (math.isfinite(x.real) and math.isfinite(y.real)):
            return PointC2(complex(math.inf, math.inf), complex(math.inf, math.inf))
    return PointC2(x, y)


def step_arrays(hmap: HenonMap, x: np.ndarray, y: np.ndarray, direction: str = "forward"):
    """One full map step on coordinate arrays (vector form of ``apply_map``)."""
    if direction == "forward":
        for fac in hmap.factors:
            x, y = y, fac.poly(y) - fac.a * x
    else:
        for fac in reversed(hmap.factors):
            x, y = (fac.poly(x) - y) / fac.a, x
    return x, y


def _factor_jacobian_fwd(fac: HenonFactor, y: complex) -> np.ndarray:
    return np.array([[0.0, 1.0], [-fac.a, fac.poly.deriv(y)]], dtype=complex)


def _factor_jacobian_bwd(fac: HenonFactor, x: complex) -> np.ndarray:
    return np.array(
        [[fac.poly.deriv(x) / fac.a, -1.0 / fac.a], [1.0, 0.0]], dtype=complex
    )


def jacobian(hmap: HenonMap, q: PointC2, n: int = 1, direction: str = "forward") -> np.ndarray:
    """Derivative of ``f^{+-n}`` at ``q`` as a 2x2 complex matrix."""
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    J = np.eye(2, dtype=complex)
    x, y = q.x, q.y
    for _ in range(n):
        if direction == "forward":
            for fac in hmap.factors:
                J = _factor_jacobian_fwd(fac, y) @ J
                x, y = y, fac.poly(y) - fac.a * x
        else:
            for fac in reversed(hmap.factors):
                J = _factor_jacobian_bwd(fac, x) @ J
                x, y = (fac.poly(x) - y) / fac.a, x
    return J


# ---------------------------------------------------------------------------
# escape radius
# ---------------------------------------------------------------------------


def _closed_form_radius(hmap: HenonMap) -> float:
    return max(3.0 + abs(f.a) + f.poly.coeff_norm() for f in hmap.factors)


def verify_radius(hmap: HenonMap, R: float, grid: int = 64) -> bool:
    """Check the sector conditions on the torus ``|x| = |y| = R``.

    Forward: after each factor the image satisfies ``|y'| >= 2 |y|``,
    ``|y'| >= |y|**d_j / 2`` and ``|y'| > |x'|``.  The backward analogue with
    the roles of x and y swapped is checked as well so that the same radius
    certifies both filtration sectors.
    """
    if R <= 0:
        return False
    phases = np.exp(2j * np.pi * np.arange(grid) / grid)
    X, Y = np.meshgrid(R * phases, R * phases)
    x, y = X.ravel(), Y.ravel()
    for fac in hmap.factors:
        xn, yn = y, fac.poly(y) - fac.a * x
        ay, ayn = np.abs(y), np.abs(yn)
        if not (
            np.all(ayn >= 2.0 * ay)
            and np.all(ayn >= ay ** fac.poly.degree / 2.0)
            and np.all(ayn > np.abs(xn))
        ):
            return False
        x, y = xn, yn
    x, y = X.ravel(), Y.ravel()
    for fac in reversed(hmap.factors):
        xn, yn = (fac.poly(x) - y) / fac.a, x
        if not (np.all(np.abs(xn) >= 2.0 * np.abs(x)) and np.all(np.abs(xn) > np.abs(yn))):
            return False
        x, y = xn, yn
    return True


def _verify_from(hmap: HenonMap, R: float, top: float, grid: int, rungs: int = 12) -> bool:
    """Verify the sector conditions on a ladder of radii from ``R`` to ``top``.

    A single radius is not enough: a large constant coefficient can make the
    torus conditions pass at a small radius that the sector dynamics never
    actually absorbs.  Sampling up to the closed-form bound (above which the
    leading term dominates outright) closes that gap.
    """
    if R <= 0:
        return False
    top = max(top, R)
    ts = np.geomspace(R, top, rungs) if top > R else [R]
    return all(verify_radius(hmap, float(t), grid) for t in ts)


@lru_cache(maxsize=None)
def _escape_radius_cached(hmap: HenonMap, grid: int):
    r0 = _closed_form_radius(hmap)
    hi = r0
    doublings = 0
    while not _verify_from(hmap, hi, r0, grid):
        hi *= 2.0
        doublings += 1
        if doublings > 60:
            raise MapDefinitionError("could not certify any escape radius")
    top = max(r0, hi)
    lo = min(1.0, hi / 2.0)
    if _verify_from(hmap, lo, top, grid):
        return lo, {"closed_form": r0, "grid": grid, "certified": lo}
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        if _verify_from(hmap, mid, top, grid):
            hi = mid
        else:
            lo = mid
    return hi, {"closed_form": r0, "grid": grid, "certified": hi}


def escape_radius(hmap: HenonMap, grid: int = 64) -> tuple[float, dict]:
    """Certified escape radius and a small certificate record.

    Starts from the closed-form bound and tightens it by bisection against
    :func:`verify_radius`.  The returned radius always passes the verifier.
    """
    return _escape_radius_cached(hmap, grid)


# ---------------------------------------------------------------------------
# orbit classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrbitClass:
    """Outcome of budgeted forward and backward iteration of one point.

    Each direction gets a ``(status, n)`` pair where status is one of
    ``"escapes"``, ``"bounded"``, ``"undetermined"``.  ``bounded`` means the
    orbit stayed inside the bidisk of radius ``R`` for the whole budget and
    is only membership evidence, never a proof.
    """

    forward: tuple[str, int]
    backward: tuple[str, int]
    n_max: int

    @property
    def summary(self) -> str:
        if self.forward[0] == "escapes":
            return f"EscapesForward({self.forward[1]})"
        if self.backward[0] == "escapes":
            return f"EscapesBackward({self.backward[1]})"
        if self.forward[0] == "bounded" and self.backward[0] == "bounded":
            return f"BoundedBoth({self.n_max})"
        return "Undetermined"


def _classify_one_direction(hmap: HenonMap, q: PointC2, direction: str, n_max: int):
    R = hmap.radius
    x, y = q.x, q.y
    in_box = True
    for n in range(n_max + 1):
        ax, ay = abs(x), abs(y)
        if max(ax, ay) > OVERFLOW_LIMIT:
            return ("escapes", n)
        if direction == "forward" and ay > max(ax, R):
            return ("escapes", n)
        if direction == "backward" and ax > max(ay, R):
            return ("escapes", n)
        in_box = max(ax, ay) <= R
        if n == n_max:
            break
        if direction == "forward":
            for fac in hmap.factors:
                x, y = y, fac.poly(y) - fac.a * x
        else:
            for fac in reversed(hmap.factors):
                x, y = (fac.poly(x) - y) / fac.a, x
        if not (math.isfinite(x.real) and math.isfinite(x.imag)
                and math.isfinite(y.real) and math.isfinite(y.imag)):
            return ("escapes", n + 1)
    return ("bounded", n_max) if in_box else ("undetermined", n_max)


def orbit_classify(hmap: HenonMap, q: PointC2, n_max: int = 200) -> OrbitClass:
    """Budgeted membership test for the forward/backward bounded-orbit sets."""
    fwd = _classify_one_direction(hmap, q, "forward", n_max)
    bwd = _classify_one_direction(hmap, q, "backward", n_max)
    return OrbitClass(forward=fwd, backward=bwd, n_max=n_max)
