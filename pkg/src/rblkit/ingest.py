"""Case loading: manifests, mask PNGs, annotation files, rasterization.

File formats
------------
Case manifest (JSON, one per case; relative paths resolve against the
manifest's directory):

    {
      "schema_version": 1,
      "case_id": "case-001",
      "patient_age": 45,                      # optional, 1..130
      "images": [
        {
          "image_id": "img-001",
          "spacing_mm_per_px": [0.1, 0.1],    # [row, col], or null
          "laterality": "left",               # left|right|unknown
          "arch": "mandible",                 # maxilla|mandible|unknown
          "numbering": "fdi",                 # fdi|universal
          "tooth_table": {"1": 36, "2": 37},  # mask label -> tooth number
          "bone_mask": "masks/b.png",         # either three mask paths...
          "tooth_mask": "masks/t.png",
          "cej_mask": "masks/c.png",
          "annotations": "ann/img-001.json",  # ...or one annotation file
          "width": 320, "height": 400,        # required with annotations
          "crown_margin_as_cej": false,
          "allow_disconnected_labels": false
        }
      ]
    }

Mask PNGs are 8-bit grayscale: 0 background, 255 foreground for binary
masks (values >= 128 read as foreground); tooth masks carry instance
labels 1..254 listed in the manifest tooth_table.

Annotation files (JSON) mirror a polygon/polyline labelling tool export:

    {
      "image_id": "img-001",
      "polygons": [
        {"roi": "bone_area", "points": [[x, y], ...]},
        {"roi": "tooth", "label": 1, "points": [[x, y], ...]},
        {"roi": "other", "points": [[x, y], ...]}
      ],
      "polylines": [
        {"roi": "cej", "points": [[x, y], ...], "crown_margin": false}
      ]
    }

Raster conventions: pixel (i, j) covers the half-open box
[i, i+1) x [j, j+1). A polygon fills every pixel whose center lies inside
under the even-odd rule, with centers exactly on the boundary counting as
inside. A polyline inks every pixel whose box the segment passes through
with positive length (supercover), so corner grazes do not ink diagonal
neighbors; a zero-length segment inks the single pixel containing it.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .domain import (
    ARCHES,
    LATERALITIES,
    NUMBERING_SYSTEMS,
    CaseRecord,
    ImageRecord,
    InputError,
    PixelSpacing,
    validate_image_record,
)

__all__ = [
    "Polygon",
    "Polyline",
    "AnnotationSet",
    "load_case",
    "load_annotations",
    "rasterize_polygon",
    "rasterize_polyline",
    "rasterize_annotations",
    "read_binary_mask",
    "read_label_mask",
    "write_mask_png",
]

ROI_POLYGON_KINDS = ("bone_area", "tooth", "other")


@dataclass(frozen=True)
class Polygon:
    roi: str
    points: np.ndarray  # (V, 2) float, V >= 3
    label: Optional[int] = None

    def __post_init__(self):
        pts = np.asarray(self.points, float)
        if self.roi not in ROI_POLYGON_KINDS:
            raise InputError(f"unknown polygon roi {self.roi!r}")
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
            raise InputError("polygon needs >= 3 (x, y) vertices")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class Polyline:
    points: np.ndarray  # (V, 2) float, V >= 2
    crown_margin: bool = False
    roi: str = "cej"

    def __post_init__(self):
        pts = np.asarray(self.points, float)
        if self.roi != "cej":
            raise InputError(f"unknown polyline roi {self.roi!r}")
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise InputError("polyline needs >= 2 (x, y) vertices")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class AnnotationSet:
    image_id: str
    polygons: tuple[Polygon, ...] = ()
    polylines: tuple[Polyline, ...] = ()


def _clamp_points(pts: np.ndarray, width: int, height: int, what: str) -> np.ndarray:
    clamped = np.clip(pts, [0.0, 0.0], [float(width), float(height)])
    if not np.array_equal(clamped, pts):
        warnings.warn(f"{what}: vertices outside {width}x{height} clamped to bounds")
    return clamped


def rasterize_polygon(points: np.ndarray, width: int, height: int) -> np.ndarray:
    """Fill a polygon: pixel centers inside under the even-odd rule.

    Centers lying exactly on an edge count as inside. A zero-area polygon
    produces an empty mask with a warning.
    """
    pts = np.asarray(points, float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise InputError("polygon needs >= 3 (x, y) vertices")
    x1, y1 = pts[:, 0], pts[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)

    area2 = float(np.sum(x1 * y2 - x2 * y1))
    if area2 == 0.0:
        warnings.warn("zero-area polygon rasterizes to an empty mask")
        return np.zeros((height, width), bool)

    cx = np.arange(width, dtype=float) + 0.5
    cy = np.arange(height, dtype=float) + 0.5
    X = cx[None, :, None]  # (1, W, V)
    Y = cy[:, None, None]  # (H, 1, V)

    ex1, ey1 = x1[None, None, :], y1[None, None, :]
    ex2, ey2 = x2[None, None, :], y2[None, None, :]

    crosses = (ey1 <= Y) != (ey2 <= Y)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (Y - ey1) / (ey2 - ey1)
        xint = ex1 + t * (ex2 - ex1)
    inside = (np.sum(crosses & (xint > X), axis=2) % 2).astype(bool)

    # boundary ties: center exactly on a (closed) edge segment
    dx, dy = ex2 - ex1, ey2 - ey1
    px, py = X - ex1, Y - ey1
    cross = px * dy - py * dx
    dot = px * dx + py * dy
    seglen2 = dx * dx + dy * dy
    on_edge = (cross == 0.0) & (dot >= 0.0) & (dot <= seglen2) & (seglen2 > 0.0)
    return inside | on_edge.any(axis=2)


def _segment_pixels(a: np.ndarray, b: np.ndarray, width: int, height: int) -> np.ndarray:
    """Supercover pixels of one segment as a (H, W) bool mask."""
    out = np.zeros((height, width), bool)
    if np.array_equal(a, b):
        i, j = int(np.floor(a[0])), int(np.floor(a[1]))
        if 0 <= i < width and 0 <= j < height:
            out[j, i] = True
        return out

    i0 = max(int(np.floor(min(a[0], b[0]))), 0)
    i1 = min(int(np.floor(max(a[0], b[0]))), width - 1)
    j0 = max(int(np.floor(min(a[1], b[1]))), 0)
    j1 = min(int(np.floor(max(a[1], b[1]))), height - 1)
    if i1 < i0 or j1 < j0:
        return out

    ii = np.arange(i0, i1 + 1, dtype=float)
    jj = np.arange(j0, j1 + 1, dtype=float)
    I, J = np.meshgrid(ii, jj)

    d = b - a
    t0 = np.zeros_like(I)
    t1 = np.ones_like(I)
    for p, qlo, qhi in (
        (d[0], I - a[0], I + 1.0 - a[0]),
        (d[1], J - a[1], J + 1.0 - a[1]),
    ):
        if p == 0.0:
            # parallel to this axis: inside iff qlo <= 0 <= qhi
            ok = (qlo <= 0.0) & (qhi >= 0.0)
            t0 = np.where(ok, t0, 2.0)
        else:
            ta, tb = qlo / p, qhi / p
            lo, hi = np.minimum(ta, tb), np.maximum(ta, tb)
            t0 = np.maximum(t0, lo)
            t1 = np.minimum(t1, hi)

    hit = t1 > t0
    # keep the half-open convention: the clipped midpoint must fall in
    # [i, i+1) x [j, j+1), which rejects runs lying on a far edge
    tm = 0.5 * (t0 + t1)
    mx = a[0] + tm * d[0]
    my = a[1] + tm * d[1]
    hit &= (mx >= I) & (mx < I + 1.0) & (my >= J) & (my < J + 1.0)
    out[j0 : j1 + 1, i0 : i1 + 1] = hit
    return out


def rasterize_polyline(points: np.ndarray, width: int, height: int) -> np.ndarray:
    """Supercover rasterization of a polyline: union over its segments."""
    pts = np.asarray(points, float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise InputError("polyline needs >= 2 (x, y) vertices")
    out = np.zeros((height, width), bool)
    for a, b in zip(pts[:-1], pts[1:]):
        out |= _segment_pixels(a, b, width, height)
    return out


def rasterize_annotations(
    ann: AnnotationSet, width: int, height: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """Burn an annotation set into (bone, tooth-label, cej) masks.

    "other" polygons are carried in the AnnotationSet but draw nothing;
    no measurement consumes them. Returns the masks plus a flag that is
    true when any CEJ polyline was marked as a crown margin.
    """
    bone = np.zeros((height, width), bool)
    tooth = np.zeros((height, width), np.int32)
    cej = np.zeros((height, width), bool)
    next_label = 1
    for poly in ann.polygons:
        if poly.roi == "bone_area":
            bone |= rasterize_polygon(poly.points, width, height)
        elif poly.roi == "tooth":
            label = poly.label
            if label is None:
                label = next_label
            next_label = max(next_label, label + 1)
            filled = rasterize_polygon(poly.points, width, height)
            if (tooth[filled] != 0).any():
                warnings.warn(f"{ann.image_id}: tooth polygons overlap; later label wins")
            tooth[filled] = label
    crown_margin = False
    for line in ann.polylines:
        cej |= rasterize_polyline(line.points, width, height)
        crown_margin = crown_margin or line.crown_margin
    return bone, tooth, cej, crown_margin


def load_annotations(path: Path, width: int, height: int) -> AnnotationSet:
    data = _read_json(path)
    image_id = str(data.get("image_id", path.stem))
    polygons = []
    for k, entry in enumerate(data.get("polygons", [])):
        pts = np.asarray(entry.get("points", []), float)
        if pts.ndim != 2 or pts.shape[0] < 3:
            raise InputError(f"{path}: polygons[{k}] needs >= 3 points")
        pts = _clamp_points(pts, width, height, f"{path}: polygons[{k}]")
        label = entry.get("label")
        polygons.append(Polygon(roi=entry.get("roi", "other"), points=pts,
                                label=None if label is None else int(label)))
    polylines = []
    for k, entry in enumerate(data.get("polylines", [])):
        pts = np.asarray(entry.get("points", []), float)
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise InputError(f"{path}: polylines[{k}] needs >= 2 points")
        pts = _clamp_points(pts, width, height, f"{path}: polylines[{k}]")
        polylines.append(Polyline(points=pts, crown_margin=bool(entry.get("crown_margin", False))))
    return AnnotationSet(image_id=image_id, polygons=tuple(polygons), polylines=tuple(polylines))


# ---------------------------------------------------------------------------
# PNG mask IO
# ---------------------------------------------------------------------------


def read_binary_mask(path: Path) -> np.ndarray:
    arr = _read_gray_png(path)
    return arr >= 128


def read_label_mask(path: Path) -> np.ndarray:
    return _read_gray_png(path).astype(np.int32)


def write_mask_png(arr: np.ndarray, path: Path) -> None:
    arr = np.asarray(arr)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    if arr.dtype != np.uint8:
        if arr.min() < 0 or arr.max() > 255:
            raise InputError("label mask values must fit in uint8 (0..255)")
        arr = arr.astype(np.uint8)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode="L").save(path)


def _read_gray_png(path: Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise InputError(f"mask file not found: {path}")
    with Image.open(path) as img:
        if img.mode != "L":
            img = img.convert("L")
        return np.asarray(img, dtype=np.uint8)


def _read_json(path: Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise InputError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


# ---------------------------------------------------------------------------
# Case manifest
# ---------------------------------------------------------------------------


def load_case(manifest_path) -> CaseRecord:
    """Load and validate a case: every mask read, every annotation rasterized.

    Ordering is deterministic (by image_id) regardless of manifest order.
    """
    manifest_path = Path(manifest_path)
    data = _read_json(manifest_path)
    base = manifest_path.parent

    case_id = data.get("case_id")
    if not case_id or not isinstance(case_id, str):
        raise InputError(f"{manifest_path}: case_id must be a nonempty string")
    age = data.get("patient_age")
    if age is not None:
        if not isinstance(age, int) or isinstance(age, bool) or not (1 <= age <= 130):
            raise InputError(f"{manifest_path}: patient_age must be an integer in [1, 130]")
    entries = data.get("images")
    if not isinstance(entries, list) or len(entries) < 1:
        raise InputError(f"{manifest_path}: images must be a nonempty list")

    records = []
    seen_ids = set()
    for k, entry in enumerate(entries):
        where = f"{manifest_path}: images[{k}]"
        if not isinstance(entry, dict):
            raise InputError(f"{where} must be an object")
        image_id = entry.get("image_id")
        if not image_id or not isinstance(image_id, str):
            raise InputError(f"{where}.image_id must be a nonempty string")
        if image_id in seen_ids:
            raise InputError(f"{where}.image_id duplicates {image_id!r}")
        seen_ids.add(image_id)

        spacing = None
        raw_spacing = entry.get("spacing_mm_per_px")
        if raw_spacing is not None:
            if not (isinstance(raw_spacing, (list, tuple)) and len(raw_spacing) == 2):
                raise InputError(f"{where}.spacing_mm_per_px must be [row_mm, col_mm] or null")
            spacing = PixelSpacing(float(raw_spacing[0]), float(raw_spacing[1]))

        laterality = entry.get("laterality", "unknown")
        arch = entry.get("arch", "unknown")
        numbering = entry.get("numbering", "fdi")
        if laterality not in LATERALITIES:
            raise InputError(f"{where}.laterality must be one of {LATERALITIES}")
        if arch not in ARCHES:
            raise InputError(f"{where}.arch must be one of {ARCHES}")
        if numbering not in NUMBERING_SYSTEMS:
            raise InputError(f"{where}.numbering must be one of {NUMBERING_SYSTEMS}")

        raw_table = entry.get("tooth_table", {})
        if not isinstance(raw_table, dict):
            raise InputError(f"{where}.tooth_table must be an object")
        try:
            tooth_table = {int(lbl): int(num) for lbl, num in raw_table.items()}
        except (TypeError, ValueError):
            raise InputError(f"{where}.tooth_table keys/values must be integers") from None

        crown_margin = bool(entry.get("crown_margin_as_cej", False))
        if "annotations" in entry:
            w, h = entry.get("width"), entry.get("height")
            if not (isinstance(w, int) and isinstance(h, int) and w >= 1 and h >= 1):
                raise InputError(f"{where}: width/height required with annotations")
            ann = load_annotations(base / entry["annotations"], w, h)
            bone, tooth, cej, ann_margin = rasterize_annotations(ann, w, h)
            crown_margin = crown_margin or ann_margin
        else:
            for key in ("bone_mask", "tooth_mask", "cej_mask"):
                if key not in entry:
                    raise InputError(f"{where}.{key} is required (or provide annotations)")
            bone = read_binary_mask(base / entry["bone_mask"])
            tooth = read_label_mask(base / entry["tooth_mask"])
            cej = read_binary_mask(base / entry["cej_mask"])

        record = ImageRecord(
            image_id=image_id,
            tooth_table=tooth_table,
            numbering=numbering,
            bone_mask=bone,
            tooth_mask=tooth,
            cej_mask=cej,
            spacing=spacing,
            laterality=laterality,
            arch=arch,
            crown_margin_as_cej=crown_margin,
            allow_disconnected_labels=bool(entry.get("allow_disconnected_labels", False)),
        )
        records.append(validate_image_record(record))

    records.sort(key=lambda r: r.image_id)
    return CaseRecord(case_id=case_id, patient_age=age, records=tuple(records))
