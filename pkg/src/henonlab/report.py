"""Canonical JSON reports and binary PPM rendering.

Reports are serialized in a canonical form so that identical analysis
results give byte-identical files regardless of worker count or dict
construction order: object keys sorted, floats printed with 17 significant
digits, ``None`` fields omitted.  Wall-clock timing never goes into the
canonical document; callers who want it write a sidecar.
"""

from __future__ import annotations

import numpy as np

from .slice_topology import K_PLUS, U_PLUS, UNDET, SliceRaster

SCHEMA = "henon-lab/1"


# ---------------------------------------------------------------------------
# canonical JSON
# ---------------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if x != x:
        return '"nan"'
    if x == float("inf"):
        return '"inf"'
    if x == float("-inf"):
        return '"-inf"'
    if x == int(x) and abs(x) < 1e16:
        return f"{x:.1f}"
    return f"{x:.17g}"


def _escape(s: str) -> str:
    out = []
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return "".join(out)


def canonical_json(obj) -> str:
    """Serialize to canonical JSON text (no trailing newline)."""
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return canonical_json({"im": obj.imag, "re": obj.real})
    if isinstance(obj, str):
        return f'"{_escape(obj)}"'
    if isinstance(obj, dict):
        items = []
        for k in sorted(obj):
            if obj[k] is None:
                continue
            items.append(f'"{_escape(str(k))}":{canonical_json(obj[k])}')
        return "{" + ",".join(items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(canonical_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_report(document: dict, path) -> None:
    doc = dict(document)
    doc["schema"] = SCHEMA
    text = canonical_json(doc) + "\n"
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# report fragments for the library dataclasses
# ---------------------------------------------------------------------------


def saddle_dict(orbit) -> dict:
    return {
        "period": orbit.period,
        "points": [{"x": complex(p.x), "y": complex(p.y)} for p in orbit.points],
        "lam_u": complex(orbit.lam_u),
        "lam_s": complex(orbit.lam_s),
        "lyapunov": float(orbit.lyapunov),
    }


def chart_dict(chart, residual: float | None = None) -> dict:
    out = {
        "period": chart.period,
        "direction": chart.direction,
        "multiplier": complex(chart.multiplier),
        "rho": float(chart.rho_val),
        "alpha": float(chart.alpha),
        "n_series": chart.n_series,
    }
    if residual is not None:
        out["residual"] = float(residual)
    return out


def end_dict(end) -> dict:
    return {
        "label": end.label,
        "meets_ring": end.meets_ring,
        "classification": end.classification,
        "samples": [[float(a), float(b)] for a, b in end.samples],
        "growth_const": end.growth_const,
    }


def witness_dict(w) -> dict:
    return {
        "label": w.label,
        "n_cells": w.n_cells,
        "bbox": [float(v) for v in w.bbox],
        "charge": w.charge,
        "loop": [complex(z) for z in w.loop] if w.loop is not None else None,
    }


def component_dict(rep) -> dict:
    return {
        "r": float(rep.r),
        "m": rep.m,
        "n_kplus": rep.n_kplus,
        "n_uplus": rep.n_uplus,
        "c_count": rep.c_count,
        "g_count": rep.g_count,
        "undetermined_fraction": float(rep.undetermined_fraction),
        "witness_threshold": float(rep.witness_threshold),
        "ends": [end_dict(e) for e in rep.ends],
        "witnesses": [witness_dict(w) for w in rep.witnesses],
    }


def verdict_dict(v) -> dict:
    return {
        "status": v.status,
        "reason": v.reason,
        "j_connected": v.j_connected,
        "analyzed": v.analyzed,
        "r_max": v.r_max,
        "resolution": v.resolution,
        "witness": witness_dict(v.witness) if v.witness is not None else None,
        "witness_r": v.witness_r,
        "levels": [component_dict(rep) for rep in v.levels],
    }


def ray_dict(trace) -> dict:
    return {
        "theta": float(trace.theta),
        "n_samples": len(trace.samples),
        "landed": trace.landed,
        "endpoint": complex(trace.endpoint) if trace.endpoint is not None else None,
        "endpoint_diameter": float(trace.endpoint_diameter),
        "fail_level": trace.fail_level,
    }


def solenoid_dict(window) -> dict:
    return {
        "j_min": window.j_min,
        "j_max": window.j_max,
        "log_z": [complex(v) for v in window.log_z],
        "residuals": [float(v) for v in window.residuals],
    }


# ---------------------------------------------------------------------------
# PPM rendering
# ---------------------------------------------------------------------------


def _hsv_to_rgb(h: np.ndarray, s: float, v: float) -> np.ndarray:
    """Vectorized hue (in [0,1)) to uint8 RGB at fixed saturation/value."""
    h6 = (h % 1.0) * 6.0
    i = np.floor(h6).astype(int) % 6
    f = h6 - np.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    ones = np.full_like(f, v)
    pf = np.full_like(f, p)
    r = np.choose(i, [ones, q, pf, pf, t, ones])
    g = np.choose(i, [t, ones, ones, q, pf, pf])
    b = np.choose(i, [pf, pf, t, ones, ones, q])
    rgb = np.stack([r, g, b], axis=-1)
    return np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)


def write_ppm(raster: SliceRaster, path, palette=None) -> None:
    """Render a slice raster to a binary PPM (P6) file.

    Bounded-set cells are black, undetermined cells red, escaping cells
    colored by the palette (default: hue cycling with log of the potential).
    The top image row corresponds to the largest imaginary part.
    """
    m = raster.m
    img = np.zeros((m, m, 3), dtype=np.uint8)
    img[raster.cls == UNDET] = (255, 0, 0)
    u = raster.cls == U_PLUS
    if u.any():
        g = raster.value[u]
        if palette is None:
            logd = np.log(float(raster.chart.hmap.degree))
            with np.errstate(divide="ignore"):
                hue = np.where(g > 0.0, np.log(np.maximum(g, 1e-300)) / logd, 0.0)
            img[u] = _hsv_to_rgb(hue, 0.85, 1.0)
        else:
            img[u] = palette(g)
    img = img[::-1]  # row 0 of the file is the top of the picture
    header = f"P6\n{m} {m}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.tobytes())
