"""Independent reference implementations used to cross-check the library.

These are deliberately written with different algorithms than the package:
areas come from Monte Carlo point sampling, and average precision from
exhaustive prefix enumeration of the PR staircase.
"""

from __future__ import annotations

import numpy as np


def random_convex_polygon(rng: np.random.Generator, n_vertices: int = 6,
                          radius: float = 2.0,
                          center: tuple[float, float] = (0.0, 0.0)
                          ) -> np.ndarray:
    """Convex CCW polygon from sorted angles on a jittered circle."""
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=n_vertices))
    radii = rng.uniform(0.4 * radius, radius, size=n_vertices)
    pts = np.stack([center[0] + radii * np.cos(angles),
                    center[1] + radii * np.sin(angles)], axis=1)
    hull = _convex_hull(pts)
    return hull


def _convex_hull(pts: np.ndarray) -> np.ndarray:
    """Andrew monotone chain; returns CCW hull vertices."""
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def half(points):
        out: list[np.ndarray] = []
        for p in points:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def points_in_convex(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Boolean mask: point inside (or on) a convex CCW polygon."""
    inside = np.ones(len(points), dtype=bool)
    n = len(poly)
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        edge = b - a
        rel = points - a
        cross = edge[0] * rel[:, 1] - edge[1] * rel[:, 0]
        inside &= cross >= -1e-12
    return inside


def mc_intersection_area(p: np.ndarray, q: np.ndarray, n_samples: int,
                         rng: np.random.Generator) -> float:
    """Monte Carlo area of p ∩ q, sampling the overlap of bounding boxes."""
    lo = np.maximum(p.min(axis=0), q.min(axis=0))
    hi = np.minimum(p.max(axis=0), q.max(axis=0))
    if np.any(hi <= lo):
        return 0.0
    samples = rng.uniform(lo, hi, size=(n_samples, 2))
    mask = points_in_convex(samples, p) & points_in_convex(samples, q)
    box_area = float(np.prod(hi - lo))
    return box_area * float(mask.mean())


def mc_polygon_area(p: np.ndarray, n_samples: int,
                    rng: np.random.Generator) -> float:
    lo = p.min(axis=0)
    hi = p.max(axis=0)
    samples = rng.uniform(lo, hi, size=(n_samples, 2))
    mask = points_in_convex(samples, p)
    return float(np.prod(hi - lo)) * float(mask.mean())


def brute_force_ap(ranked: list[tuple[float, bool]], n_gt: int,
                   recall_points: int = 101) -> float:
    """Interpolated AP by enumerating every ranked prefix.

    `ranked` is a confidence-descending list of (confidence, is_tp). For
    each evenly spaced recall level, scan all prefixes and take the best
    precision among those whose recall meets the level.
    """
    if n_gt <= 0:
        raise ValueError("n_gt must be positive")
    prefixes = []
    tp = fp = 0
    for _, is_tp in ranked:
        tp += int(is_tp)
        fp += int(not is_tp)
        prefixes.append((tp / n_gt, tp / (tp + fp)))
    total = 0.0
    for level in np.linspace(0.0, 1.0, recall_points):
        best = 0.0
        for recall, precision in prefixes:
            if recall >= level - 1e-15 and precision > best:
                best = precision
        total += best
    return total / recall_points
