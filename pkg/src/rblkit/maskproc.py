"""Binary-mask post-processing: smoothing, small-component removal, contours.

Foreground connectivity defaults to 8, background to 4 (the standard
digital-topology pairing). Border handling during smoothing replicates
edge values so regions touching the frame are not eroded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .domain import InputError

__all__ = [
    "MaskprocParams",
    "Contour",
    "smooth_binarize",
    "remove_small_components",
    "extract_contours",
    "boundary_mask",
    "mask_and",
    "dilate",
    "largest_component",
    "clean_binary",
]

EIGHT = np.ones((3, 3), bool)
FOUR = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class MaskprocParams:
    """Post-processing knobs, echoed into every report for reproducibility.

    The Gaussian pass applies to the area-like bone and tooth masks;
    the CEJ curve is thin (1-3 px), so it only gets component filtering
    by default (sigma_cej > 0 would erase any line under 3 px wide).
    """

    sigma: float = 1.5
    sigma_cej: float = 0.0
    bin_threshold: float = 0.5
    min_area_bone: int = 64
    min_area_cej: int = 8

    def __post_init__(self):
        if self.sigma < 0 or self.sigma_cej < 0:
            raise InputError("sigma must be >= 0")
        if not (0.0 < self.bin_threshold < 1.0):
            raise InputError("bin_threshold must be in (0, 1)")
        if self.min_area_bone < 0 or self.min_area_cej < 0:
            raise InputError("min_area must be >= 0")


def smooth_binarize(mask: np.ndarray, sigma: float, threshold: float) -> np.ndarray:
    """Gaussian-smooth a {0,1} field and re-threshold it.

    The kernel is a truncated Gaussian of radius ceil(3*sigma) normalized to
    sum 1, applied separably with edge replication. sigma=0 is the identity.
    """
    if sigma < 0:
        raise InputError("sigma must be >= 0")
    if not (0.0 < threshold < 1.0):
        raise InputError("threshold must be in (0, 1)")
    mask = np.asarray(mask, bool)
    if sigma == 0:
        return mask.copy()
    radius = int(np.ceil(3.0 * sigma))
    field = ndimage.gaussian_filter(
        mask.astype(np.float64), sigma=sigma, mode="nearest", radius=radius
    )
    return field > threshold


def remove_small_components(
    mask: np.ndarray, min_area_px: int, connectivity: int = 8
) -> np.ndarray:
    """Delete every connected component smaller than min_area_px pixels."""
    if min_area_px < 0:
        raise InputError("min_area_px must be >= 0")
    if connectivity not in (4, 8):
        raise InputError("connectivity must be 4 or 8")
    mask = np.asarray(mask, bool)
    if min_area_px == 0 or not mask.any():
        return mask.copy()
    structure = EIGHT if connectivity == 8 else FOUR
    labels, n = ndimage.label(mask, structure=structure)
    if n == 0:
        return mask.copy()
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    keep = counts >= min_area_px
    keep[0] = False
    return keep[labels]


def mask_and(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pixelwise conjunction of two same-sized binary masks."""
    a = np.asarray(a, bool)
    b = np.asarray(b, bool)
    if a.shape != b.shape:
        raise InputError(f"mask_and: shapes differ ({a.shape} vs {b.shape})")
    return a & b


def dilate(mask: np.ndarray, radius_px: int = 1) -> np.ndarray:
    """Chebyshev (square) dilation by the given radius."""
    if radius_px <= 0:
        return np.asarray(mask, bool).copy()
    size = 2 * radius_px + 1
    return ndimage.binary_dilation(np.asarray(mask, bool), structure=np.ones((size, size), bool))


def boundary_mask(mask: np.ndarray) -> np.ndarray:
    """Pixels with at least one background 4-neighbor, or on the image edge."""
    mask = np.asarray(mask, bool)
    interior = ndimage.binary_erosion(mask, structure=FOUR, border_value=0)
    return mask & ~interior


def largest_component(mask: np.ndarray, connectivity: int = 8) -> np.ndarray:
    """Keep only the largest connected component (empty in, empty out)."""
    mask = np.asarray(mask, bool)
    structure = EIGHT if connectivity == 8 else FOUR
    labels, n = ndimage.label(mask, structure=structure)
    if n <= 1:
        return mask.copy()
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    return labels == int(np.argmax(counts))


def clean_binary(mask: np.ndarray, sigma: float, threshold: float, min_area: int) -> np.ndarray:
    """The standard noise-removal pass: smooth, re-threshold, drop specks."""
    out = smooth_binarize(mask, sigma, threshold)
    return remove_small_components(out, min_area, connectivity=8)


@dataclass(frozen=True)
class Contour:
    """A closed 8-connected border walk in pixel coordinates.

    points is an (N, 2) int array of (x, y) pairs with first == last and
    N >= 5 (at least 4 walk points plus the closing duplicate; tiny regions
    repeat points). Outer walks are counterclockwise in the conventional
    y-up sense, which shows up as a positive shoelace sum in raw image
    (x, y-down) coordinates; holes are traced the opposite way.
    """

    points: np.ndarray
    kind: str  # "outer" | "hole"

    def __post_init__(self):
        pts = np.asarray(self.points, np.int64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise InputError("contour needs an (N, 2) point array with N >= 2")
        if self.kind not in ("outer", "hole"):
            raise InputError(f"unknown contour kind {self.kind!r}")
        object.__setattr__(self, "points", pts)

    def signed_area(self) -> float:
        x = self.points[:, 0].astype(float)
        y = self.points[:, 1].astype(float)
        return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))


# Moore neighborhood in clockwise screen order starting east (y grows down).
_MOORE_CW = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
_MOORE_CCW = tuple(reversed(_MOORE_CW))


def _trace_border(region: np.ndarray, start: tuple[int, int], backtrack: tuple[int, int],
                  clockwise: bool) -> list[tuple[int, int]]:
    """Moore-neighbor border following from (start, backtrack).

    region is a padded bool array indexed [y, x] whose border pixels never
    touch the array edge; start is a border pixel and backtrack one of its
    background neighbors. The walk ends when the (pixel, backtrack) state
    recurs, which closes the border cycle exactly once.
    """
    order = _MOORE_CW if clockwise else _MOORE_CCW

    def advance(c, b):
        k = order.index((b[0] - c[0], b[1] - c[1]))
        prev_bg = b
        for step in range(1, 9):
            d = order[(k + step) % 8]
            p = (c[0] + d[0], c[1] + d[1])
            if region[p[1], p[0]]:
                return p, prev_bg
            prev_bg = p
        return None

    # the walk is a deterministic orbit over (pixel, backtrack) states; the
    # initial state can be a transient, so cut the emitted walk at the first
    # repeated state and rotate the cycle to begin at the start pixel
    seen: dict[tuple, int] = {}
    states: list[tuple] = []
    state = (start, backtrack)
    for _ in range(8 * int(region.sum()) + 16):
        if state in seen:
            cycle = states[seen[state] :]
            pixels = [s[0] for s in cycle]
            k = next(i for i, p in enumerate(pixels) if p == start)
            return pixels[k:] + pixels[:k]
        seen[state] = len(states)
        states.append(state)
        nxt = advance(*state)
        if nxt is None:  # isolated pixel
            return [start]
        state = nxt
    raise RuntimeError("border trace failed to close")  # pragma: no cover


def _finish(walk: list[tuple[int, int]], kind: str) -> np.ndarray:
    pts = list(walk)
    if pts[0] != pts[-1] or len(pts) == 1:
        pts.append(pts[0])
    while len(pts) < 5:  # >= 4 walk points plus the closing duplicate
        pts.insert(0, pts[0])
    arr = np.asarray(pts, np.int64)
    # normalize orientation: outer positive shoelace in y-down coordinates
    # (counterclockwise with y up), holes negative; reversal re-traces the
    # same border the other way around
    x, y = arr[:, 0].astype(float), arr[:, 1].astype(float)
    area = 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))
    if (kind == "outer" and area < 0) or (kind == "hole" and area > 0):
        arr = arr[::-1]
    return arr


def extract_contours(mask: np.ndarray) -> list[Contour]:
    """Trace one outer contour per 8-connected component plus hole contours.

    The union of traced pixels equals the morphological boundary
    (boundary_mask). Holes are 4-connected background components fully
    enclosed by foreground.
    """
    mask = np.asarray(mask, bool)
    if not mask.any():
        return []
    padded = np.pad(mask, 1, constant_values=False)
    contours: list[Contour] = []

    labels, n = ndimage.label(padded, structure=EIGHT)
    for idx in range(1, n + 1):
        region = labels == idx
        ys, xs = np.nonzero(region)
        k = int(np.lexsort((xs, ys))[0])  # topmost, then leftmost
        start = (int(xs[k]), int(ys[k]))
        walk = _trace_border(region, start, (start[0], start[1] - 1), clockwise=True)
        contours.append(Contour(points=_finish(walk, "outer") - 1, kind="outer"))

    bg_labels, bn = ndimage.label(~padded, structure=FOUR)
    outside = int(bg_labels[0, 0])
    for hole_idx in range(1, bn + 1):
        if hole_idx == outside:
            continue
        hys, hxs = np.nonzero(bg_labels == hole_idx)
        k = int(np.lexsort((hxs, hys))[0])
        hx, hy = int(hxs[k]), int(hys[k])
        owner = int(labels[hy - 1, hx])  # pixel above a hole's topmost pixel is foreground
        walk = _trace_border(labels == owner, (hx, hy - 1), (hx, hy), clockwise=False)
        contours.append(Contour(points=_finish(walk, "hole") - 1, kind="hole"))
    return contours
