"""Shared fixtures and independent brute-force oracles.

The oracles here intentionally use plain scalar loops over definitions,
never the vectorized production code paths they check.
"""

from __future__ import annotations

import math

import numpy as np
import pytest


def brute_force_point_in_polygon(px: float, py: float, pts: np.ndarray) -> bool:
    """Even-odd crossing test with exact on-edge acceptance, scalar loops."""
    n = len(pts)
    for i in range(n):
        ax, ay = pts[i]
        bx, by = pts[(i + 1) % n]
        cross = (px - ax) * (by - ay) - (py - ay) * (bx - ax)
        dot = (px - ax) * (bx - ax) + (py - ay) * (by - ay)
        seg2 = (bx - ax) ** 2 + (by - ay) ** 2
        if seg2 > 0 and cross == 0 and 0 <= dot <= seg2:
            return True
    inside = False
    for i in range(n):
        ax, ay = pts[i]
        bx, by = pts[(i + 1) % n]
        if (ay <= py) != (by <= py):
            x_int = ax + (py - ay) * (bx - ax) / (by - ay)
            if x_int > px:
                inside = not inside
    return inside


def brute_force_polygon_raster(pts: np.ndarray, width: int, height: int) -> np.ndarray:
    out = np.zeros((height, width), bool)
    for j in range(height):
        for i in range(width):
            out[j, i] = brute_force_point_in_polygon(i + 0.5, j + 0.5, pts)
    return out


def brute_force_segment_box_hit(a, b, i: int, j: int) -> bool:
    """Does segment a->b pass through pixel (i, j)'s half-open box?

    Positive-length intersection with [i, i+1) x [j, j+1); a degenerate
    segment counts when its point lies in the box.
    """
    ax, ay = a
    bx, by = b
    if (ax, ay) == (bx, by):
        return i <= ax < i + 1 and j <= ay < j + 1
    t0, t1 = 0.0, 1.0
    for p, lo, hi in ((bx - ax, i - ax, i + 1 - ax), (by - ay, j - ay, j + 1 - ay)):
        if p == 0:
            if not (lo <= 0 <= hi):
                return False
        else:
            ta, tb = lo / p, hi / p
            t0 = max(t0, min(ta, tb))
            t1 = min(t1, max(ta, tb))
    if not (t1 > t0):
        return False
    tm = 0.5 * (t0 + t1)
    mx, my = ax + tm * (bx - ax), ay + tm * (by - ay)
    return i <= mx < i + 1 and j <= my < j + 1


def brute_force_polyline_raster(pts: np.ndarray, width: int, height: int) -> np.ndarray:
    out = np.zeros((height, width), bool)
    for a, b in zip(pts[:-1], pts[1:]):
        for j in range(height):
            for i in range(width):
                out[j, i] |= brute_force_segment_box_hit(tuple(a), tuple(b), i, j)
    return out


def brute_force_gaussian_smooth(mask: np.ndarray, sigma: float) -> np.ndarray:
    """Direct truncated-Gaussian convolution with edge replication."""
    radius = math.ceil(3 * sigma)
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel = kernel / kernel.sum()
    h, w = mask.shape
    field = mask.astype(float)
    out = np.zeros_like(field)
    for j in range(h):
        for i in range(w):
            acc = 0.0
            for dj, kj in zip(offsets, kernel):
                for di, ki in zip(offsets, kernel):
                    jj = min(max(j + dj, 0), h - 1)
                    ii = min(max(i + di, 0), w - 1)
                    acc += kj * ki * field[jj, ii]
            out[j, i] = acc
    return out


def brute_force_auroc(scores, labels) -> float:
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def t_pdf(x: float, df: float) -> float:
    return (
        math.gamma((df + 1) / 2)
        / (math.sqrt(df * math.pi) * math.gamma(df / 2))
        * (1 + x * x / df) ** (-(df + 1) / 2)
    )


def numeric_t_two_sided_p(t: float, df: float) -> float:
    """Two-sided p by adaptive quadrature of the t density."""
    from scipy.integrate import quad

    tail, _ = quad(t_pdf, abs(t), np.inf, args=(df,), epsabs=1e-12, epsrel=1e-12)
    return 2.0 * tail


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
