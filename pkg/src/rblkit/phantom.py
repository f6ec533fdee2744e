"""Synthetic mask phantoms with exact analytic ground truth.

Each tooth is a hexagonal outline (trapezoid crown joined to a tapering
root, one or two prongs) built in a local millimeter frame: u runs across
the tooth, v runs crown -> apex with v=0 at the crown top. The CEJ sits at
the widest point, the bone crest crosses each root edge at a specified
fraction of root length, and every landmark is known in closed form
before anything is rasterized. Truth RBL% per side is exactly
100 x bone-drop fraction.

The generated masks double as the verification oracle for the measurement
engine and as a toy training corpus for segmentation models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import casedx, staging
from .domain import (
    ARCH_SEQUENCES,
    CaseRecord,
    ImageRecord,
    InputError,
    PixelSpacing,
    RblStage,
    SiteMeasurement,
    ToothAssessment,
    arch_of_fdi,
    quadrant_of_fdi,
    teeth_adjacent,
    validate_image_record,
)
from .ingest import rasterize_polygon, rasterize_polyline

__all__ = [
    "PhantomLayoutError",
    "InfeasibleMixError",
    "ToothSpec",
    "SiteTruth",
    "ToothTruth",
    "ImageTruth",
    "CaseTruth",
    "generate_image",
    "generate_case",
    "degrade",
    "random_tooth_spec",
    "truth_assessments",
]


class PhantomLayoutError(InputError):
    """Teeth overlap or do not fit the requested image dimensions."""


class InfeasibleMixError(InputError):
    """The requested stage mix cannot form a valid case."""


# outline proportions relative to the crown (CEJ-level) width
CROWN_TOP_FRACTION = 0.80
TIP_WIDTH_MM = 0.25
FURCATION_FRACTION = 0.42  # notch depth below the CEJ as a fraction of root length
FURCATION_CLEARANCE_MM = 0.45  # crest must stay this far from the notch tip
CREST_MARGIN_MM = 0.6  # crest chain extends this far beyond the outline
CEJ_EXTENSION_MM = 0.7
TOOTH_GAP_MM = 2.0
FRAME_MARGIN_MM = 1.2
APICAL_MARGIN_MM = 2.5


@dataclass(frozen=True)
class ToothSpec:
    """Analytic description of one phantom tooth."""

    tooth_fdi: int
    crown_width_mm: float  # width at the CEJ bulge (the widest point)
    crown_height_mm: float  # crown top to CEJ along the axis
    root_length_mm: float  # CEJ to apex along the axis
    angle_deg: float  # axis tilt from vertical, positive tips the apex +x
    bone_drop_left: float  # fraction of root length, per local side
    bone_drop_right: float
    root_count: int = 1
    apex_offset_mm: float = 0.0  # cross-track apex distance from the axis (2-root)

    def __post_init__(self):
        if self.root_length_mm <= 0 or self.crown_height_mm <= 0 or self.crown_width_mm <= 0:
            raise InputError("tooth dimensions must be positive")
        for drop in (self.bone_drop_left, self.bone_drop_right):
            if not (0.0 <= drop < 1.0):
                raise InputError(f"bone drop must be in [0, 1), got {drop}")
        if not (-45.0 < self.angle_deg < 45.0):
            raise InputError("axis angle must be in (-45, 45) degrees")
        if self.root_count not in (1, 2):
            raise InputError("root_count must be 1 or 2")
        if self.root_count == 2 and self.apex_offset_mm <= 0:
            raise InputError("two-root teeth need a positive apex offset")

    @property
    def cej_v(self) -> float:
        return self.crown_height_mm

    @property
    def apex_v(self) -> float:
        return self.crown_height_mm + self.root_length_mm

    def edge_halfwidth(self, v: float) -> float:
        """Half-width of the outline at depth v within the root section."""
        frac = (v - self.cej_v) / self.root_length_mm
        outer_tip = (
            self.apex_offset_mm + TIP_WIDTH_MM / 2
            if self.root_count == 2
            else TIP_WIDTH_MM / 2
        )
        return (1 - frac) * self.crown_width_mm / 2 + frac * outer_tip


@dataclass(frozen=True)
class SiteTruth:
    side: str  # mesial/distal (same display convention as the engine)
    cej_px: tuple[float, float]
    bone_px: tuple[float, float]
    apex_px: tuple[float, float]
    len1_mm: float
    len2_mm: float
    rbl_percent: float
    stage: RblStage


@dataclass(frozen=True)
class ToothTruth:
    tooth_fdi: int
    sites: tuple[SiteTruth, ...]
    rbl_percent: float
    stage: RblStage

    def site(self, side: str) -> SiteTruth:
        for s in self.sites:
            if s.side == side:
                return s
        raise KeyError(side)


@dataclass(frozen=True)
class ImageTruth:
    image_id: str
    teeth: tuple[ToothTruth, ...]


@dataclass(frozen=True)
class CaseTruth:
    case_id: str
    patient_age: int
    images: tuple[ImageTruth, ...]
    case_teeth: dict[int, ToothTruth]  # per-tooth truth after the highest-wins merge
    expected_diagnosis: casedx.CaseDiagnosis


@dataclass(frozen=True)
class _Frame:
    """Local-mm -> image-mm transform for one tooth."""

    anchor: np.ndarray  # image-mm position of the local origin (crown-top center)
    d: np.ndarray  # unit apical direction in image mm
    w: np.ndarray  # unit cross direction (local +u) in image mm

    def to_image(self, uv: np.ndarray) -> np.ndarray:
        uv = np.atleast_2d(np.asarray(uv, float))
        return self.anchor + np.outer(uv[:, 0], self.w) + np.outer(uv[:, 1], self.d)


def _frame_for(spec: ToothSpec, arch: str, anchor_mm: np.ndarray) -> _Frame:
    theta = math.radians(spec.angle_deg)
    if arch == "mandible":
        d = np.array([math.sin(theta), math.cos(theta)])
    else:
        d = np.array([math.sin(theta), -math.cos(theta)])
    w = np.array([d[1], -d[0]])
    return _Frame(anchor=np.asarray(anchor_mm, float), d=d, w=w)


def _outline_local(spec: ToothSpec) -> np.ndarray:
    """Closed outline vertices in local mm, counterclockwise in (u, v)."""
    half_top = CROWN_TOP_FRACTION * spec.crown_width_mm / 2
    half_cej = spec.crown_width_mm / 2
    tip = TIP_WIDTH_MM / 2
    v_cej, v_apex = spec.cej_v, spec.apex_v
    if spec.root_count == 1:
        return np.array(
            [
                (-half_top, 0.0),
                (half_top, 0.0),
                (half_cej, v_cej),
                (tip, v_apex),
                (-tip, v_apex),
                (-half_cej, v_cej),
            ]
        )
    off = spec.apex_offset_mm
    v_furc = v_cej + FURCATION_FRACTION * spec.root_length_mm
    return np.array(
        [
            (-half_top, 0.0),
            (half_top, 0.0),
            (half_cej, v_cej),
            (off + tip, v_apex),
            (off - tip, v_apex),
            (0.0, v_furc),
            (-off + tip, v_apex),
            (-off - tip, v_apex),
            (-half_cej, v_cej),
        ]
    )


def _crest_chain_local(spec: ToothSpec) -> np.ndarray:
    """Bone-crest polyline through this tooth, in local mm.

    Flat (axis-perpendicular) runs cross each root edge exactly at the
    specified depth; the transition between the two depths happens at the
    deeper level so it cannot introduce a spuriously coronal crossing.
    """
    s_left = spec.cej_v + spec.bone_drop_left * spec.root_length_mm
    s_right = spec.cej_v + spec.bone_drop_right * spec.root_length_mm
    edge_l = spec.edge_halfwidth(s_left)
    edge_r = spec.edge_halfwidth(s_right)
    m = CREST_MARGIN_MM
    if s_left <= s_right:
        inset_u = -0.5 * edge_l
        return np.array(
            [
                (-edge_l - m, s_left),
                (inset_u, s_left),
                (inset_u, s_right),
                (edge_r + m, s_right),
            ]
        )
    inset_u = 0.5 * edge_r
    return np.array(
        [
            (-edge_l - m, s_left),
            (inset_u, s_left),
            (inset_u, s_right),
            (edge_r + m, s_right),
        ]
    )


def _cej_segment_local(spec: ToothSpec) -> np.ndarray:
    half = spec.crown_width_mm / 2 + CEJ_EXTENSION_MM
    return np.array([(-half, spec.cej_v), (half, spec.cej_v)])


def _mm_to_px(points_mm: np.ndarray, spacing: PixelSpacing) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points_mm, float))
    return np.column_stack([pts[:, 0] / spacing.col_mm_per_px, pts[:, 1] / spacing.row_mm_per_px])


def _site_truths(spec: ToothSpec, frame: _Frame, spacing: PixelSpacing,
                 policy: staging.StagingPolicy) -> tuple[SiteTruth, SiteTruth]:
    """Analytic landmarks and lengths for the local-left and local-right sites."""
    out = []
    for local_side, drop in (("L", spec.bone_drop_left), ("R", spec.bone_drop_right)):
        sgn = -1.0 if local_side == "L" else 1.0
        s = spec.cej_v + drop * spec.root_length_mm
        cej_local = (sgn * spec.crown_width_mm / 2, spec.cej_v)
        bone_local = (sgn * spec.edge_halfwidth(s), s)
        apex_u = sgn * spec.apex_offset_mm if spec.root_count == 2 else 0.0
        apex_local = (apex_u, spec.apex_v)
        len1 = drop * spec.root_length_mm
        len2 = spec.root_length_mm
        rbl = 100.0 * drop
        stage = staging.stage_site(rbl, len1, policy)
        pts_px = _mm_to_px(frame.to_image(np.array([cej_local, bone_local, apex_local])), spacing)
        out.append(
            dict(
                cej_px=(float(pts_px[0, 0]), float(pts_px[0, 1])),
                bone_px=(float(pts_px[1, 0]), float(pts_px[1, 1])),
                apex_px=(float(pts_px[2, 0]), float(pts_px[2, 1])),
                len1_mm=len1,
                len2_mm=len2,
                rbl_percent=rbl,
                stage=stage,
            )
        )
    # name the sides with the engine's display convention: larger image x is
    # mesial in quadrants 1 and 4, distal in quadrants 2 and 3
    left_first = out[0]["cej_px"][0] <= out[1]["cej_px"][0]
    lo, hi = (out[0], out[1]) if left_first else (out[1], out[0])
    if quadrant_of_fdi(spec.tooth_fdi) in (1, 4):
        names = {"lo": "distal", "hi": "mesial"}
    else:
        names = {"lo": "mesial", "hi": "distal"}
    return (
        SiteTruth(side=names["lo"], **lo),
        SiteTruth(side=names["hi"], **hi),
    )


def generate_image(
    specs: list[ToothSpec],
    spacing: PixelSpacing = PixelSpacing(0.1, 0.1),
    dims: Optional[tuple[int, int]] = None,
    seed: int = 0,
    image_id: str = "phantom-000",
    arch: str = "mandible",
    staging_policy: staging.StagingPolicy = staging.DEFAULT_POLICY,
) -> tuple[ImageRecord, ImageTruth]:
    """Rasterize a row of phantom teeth plus bone and CEJ masks.

    dims is (width, height) in pixels; omit it to size the frame
    automatically. Ground truth is computed from the specs before
    rasterization, and generation is deterministic per (specs, seed).
    """
    if not specs:
        raise InputError("generate_image needs at least one ToothSpec")
    if arch not in ("maxilla", "mandible"):
        raise InputError("phantom arch must be maxilla or mandible")
    rng = np.random.default_rng(seed)
    jitter = rng.uniform(-0.05, 0.05, size=(len(specs), 2))  # sub-pixel-scale, in mm

    # lay teeth left to right, computing outlines at provisional anchors
    frames: list[_Frame] = []
    outlines_mm: list[np.ndarray] = []
    cursor = FRAME_MARGIN_MM
    for k, spec in enumerate(specs):
        frame0 = _frame_for(spec, arch, np.zeros(2))
        outline0 = frame0.to_image(_outline_local(spec))
        shift_x = cursor - outline0[:, 0].min()
        anchor = np.array([shift_x, 0.0]) + jitter[k]
        frame = _Frame(anchor=anchor, d=frame0.d, w=frame0.w)
        outline = frame0.to_image(_outline_local(spec)) + anchor
        frames.append(frame)
        outlines_mm.append(outline)
        cursor = outline[:, 0].max() + TOOTH_GAP_MM

    all_pts = np.vstack(outlines_mm)
    width_mm = all_pts[:, 0].max() + FRAME_MARGIN_MM
    if arch == "mandible":
        shift_y = FRAME_MARGIN_MM - all_pts[:, 1].min()
        height_mm = all_pts[:, 1].max() - all_pts[:, 1].min() + FRAME_MARGIN_MM + APICAL_MARGIN_MM
    else:
        shift_y = FRAME_MARGIN_MM + APICAL_MARGIN_MM - all_pts[:, 1].min()
        height_mm = all_pts[:, 1].max() - all_pts[:, 1].min() + FRAME_MARGIN_MM + APICAL_MARGIN_MM
    dy = np.array([0.0, shift_y])
    frames = [replace(f, anchor=f.anchor + dy) for f in frames]
    outlines_mm = [o + dy for o in outlines_mm]

    need_w = int(math.ceil(width_mm / spacing.col_mm_per_px))
    need_h = int(math.ceil(height_mm / spacing.row_mm_per_px))
    if dims is None:
        width_px, height_px = need_w, need_h
    else:
        width_px, height_px = dims
        if width_px < need_w or height_px < need_h:
            raise PhantomLayoutError(
                f"teeth need {need_w}x{need_h} px but dims are {width_px}x{height_px}"
            )

    # masks
    tooth_mask = np.zeros((height_px, width_px), np.int32)
    tooth_table: dict[int, int] = {}
    for k, (spec, outline) in enumerate(zip(specs, outlines_mm), start=1):
        filled = rasterize_polygon(_mm_to_px(outline, spacing), width_px, height_px)
        if (tooth_mask[filled] != 0).any():
            raise PhantomLayoutError(
                f"tooth {spec.tooth_fdi} overlaps a previously placed tooth"
            )
        tooth_mask[filled] = k
        tooth_table[k] = spec.tooth_fdi

    crest_points = []
    for spec, frame in zip(specs, frames):
        segment = frame.to_image(_crest_chain_local(spec))
        if segment[0, 0] > segment[-1, 0]:  # maxilla frames mirror local u
            segment = segment[::-1]
        crest_points.append(segment)
    chain = np.vstack(crest_points)
    first_y, last_y = chain[0, 1], chain[-1, 1]
    apical_y = height_mm if arch == "mandible" else 0.0
    bone_poly_mm = np.vstack(
        [
            [[0.0, first_y]],
            chain,
            [[width_mm, last_y]],
            [[width_mm, apical_y]],
            [[0.0, apical_y]],
        ]
    )
    bone_mask = rasterize_polygon(_mm_to_px(bone_poly_mm, spacing), width_px, height_px)

    cej_mask = np.zeros((height_px, width_px), bool)
    for spec, frame in zip(specs, frames):
        seg = _mm_to_px(frame.to_image(_cej_segment_local(spec)), spacing)
        cej_mask |= rasterize_polyline(seg, width_px, height_px)

    laterality_votes = {1: "right", 4: "right", 2: "left", 3: "left"}
    quadrants = {quadrant_of_fdi(s.tooth_fdi) for s in specs}
    laterality = (
        laterality_votes[quadrants.pop()] if len(quadrants) == 1 else "unknown"
    )

    record = validate_image_record(
        ImageRecord(
            image_id=image_id,
            tooth_table=tooth_table,
            numbering="fdi",
            bone_mask=bone_mask,
            tooth_mask=tooth_mask,
            cej_mask=cej_mask,
            spacing=spacing,
            laterality=laterality,
            arch=arch,
        )
    )

    teeth_truth = []
    for spec, frame in zip(specs, frames):
        sites = _site_truths(spec, frame, spacing, staging_policy)
        rbl = max(s.rbl_percent for s in sites)
        stage = max(s.stage for s in sites)
        teeth_truth.append(
            ToothTruth(tooth_fdi=spec.tooth_fdi, sites=sites, rbl_percent=rbl, stage=stage)
        )
    teeth_truth.sort(key=lambda t: t.tooth_fdi)
    return record, ImageTruth(image_id=image_id, teeth=tuple(teeth_truth))


# ---------------------------------------------------------------------------
# Random specs and whole cases
# ---------------------------------------------------------------------------

# drop sampling bands per stage, away from the decision boundaries
_STAGE_MARGIN_PP = 1.2


def _sample_drop_for_stage(
    stage: RblStage, root_mm: float, rng: np.random.Generator
) -> float:
    if stage == RblStage.NO_BONE_LOSS:
        len1 = rng.uniform(0.4, 1.15)  # mm, safely under the 1.5 mm rule
        return len1 / root_mm
    if stage == RblStage.I:
        lo = max(5.0, 100.0 * 1.8 / root_mm)  # stay >= 1.8 mm so the mm rule holds
        hi = 15.0 - _STAGE_MARGIN_PP
        if lo >= hi:
            raise InputError(f"root {root_mm} mm too short for a stage-I phantom")
        return rng.uniform(lo, hi) / 100.0
    if stage == RblStage.II:
        return rng.uniform(15.0 + _STAGE_MARGIN_PP, 33.0 - _STAGE_MARGIN_PP) / 100.0
    return rng.uniform(33.0 + _STAGE_MARGIN_PP, 62.0) / 100.0


def _avoid_furcation(drop: float, root_mm: float, rng: np.random.Generator,
                     root_count: int) -> float:
    if root_count == 1:
        return drop
    furc = FURCATION_FRACTION
    clearance = FURCATION_CLEARANCE_MM / root_mm
    for _ in range(32):
        if abs(drop - furc) >= clearance:
            return drop
        drop = drop + rng.choice((-1.0, 1.0)) * clearance
        drop = min(max(drop, 0.02), 0.95)
    return furc + clearance  # pragma: no cover


def random_tooth_spec(
    tooth_fdi: int,
    stage: RblStage,
    rng: np.random.Generator,
    angle_deg: Optional[float] = None,
) -> ToothSpec:
    """A randomized spec whose worst side lands inside the given stage band."""
    # stage I needs the 1.8 mm floor to fall below the 13.8% ceiling
    root = rng.uniform(14.5, 17.5) if stage == RblStage.I else rng.uniform(13.5, 17.5)
    crown_w = rng.uniform(5.2, 7.2)
    crown_h = rng.uniform(5.5, 7.5)
    if angle_deg is None:
        angle_deg = rng.uniform(-8.0, 8.0)
    two_root = tooth_fdi % 10 >= 6
    worst = _sample_drop_for_stage(stage, root, rng)
    if stage == RblStage.NO_BONE_LOSS:
        other = _sample_drop_for_stage(stage, root, rng)
    else:
        other = worst * rng.uniform(0.55, 0.98)
    root_count = 2 if two_root else 1
    worst = _avoid_furcation(worst, root, rng, root_count)
    other = _avoid_furcation(other, root, rng, root_count)
    if rng.random() < 0.5:
        drop_l, drop_r = worst, other
    else:
        drop_l, drop_r = other, worst
    return ToothSpec(
        tooth_fdi=tooth_fdi,
        crown_width_mm=crown_w,
        crown_height_mm=crown_h,
        root_length_mm=root,
        angle_deg=float(angle_deg),
        bone_drop_left=float(drop_l),
        bone_drop_right=float(drop_r),
        root_count=root_count,
        apex_offset_mm=rng.uniform(1.2, 1.9) if two_root else 0.0,
    )


def _stage_counts(stage_mix: dict[RblStage, float], n_teeth: int) -> dict[RblStage, int]:
    total = sum(stage_mix.values())
    if abs(total - 1.0) > 1e-9:
        raise InfeasibleMixError(f"stage mix proportions sum to {total}, not 1")
    raw = {s: stage_mix.get(s, 0.0) * n_teeth for s in RblStage}
    counts = {s: int(math.floor(v)) for s, v in raw.items()}
    leftovers = sorted(RblStage, key=lambda s: raw[s] - counts[s], reverse=True)
    k = 0
    while sum(counts.values()) < n_teeth:
        counts[leftovers[k % len(leftovers)]] += 1
        k += 1
    return counts


def _pick_teeth(n_teeth: int) -> list[int]:
    upper = [t for t in ARCH_SEQUENCES["maxilla"] if t % 10 != 8]  # skip third molars
    lower = [t for t in ARCH_SEQUENCES["mandible"] if t % 10 != 8]
    if n_teeth > len(upper) + len(lower):
        raise InputError(f"n_teeth at most {len(upper) + len(lower)}")
    n_upper = min((n_teeth + 1) // 2, len(upper))
    n_lower = n_teeth - n_upper
    return upper[:n_upper] + lower[:n_lower]


def _assign_stages(
    teeth: list[int], counts: dict[RblStage, int], rng: np.random.Generator
) -> dict[int, RblStage]:
    order = list(teeth)
    rng.shuffle(order)
    stages: dict[int, RblStage] = {}
    pool: list[RblStage] = []
    for stage in (RblStage.III, RblStage.II, RblStage.I, RblStage.NO_BONE_LOSS):
        pool.extend([stage] * counts[stage])
    for tooth, stage in zip(order, pool):
        stages[tooth] = stage

    affected = sorted(t for t, s in stages.items() if s >= RblStage.I)
    if 0 < len(affected) < 2:
        raise InfeasibleMixError(
            "the mix marks bone loss but yields fewer than 2 affected teeth"
        )
    if len(affected) == 2 and teeth_adjacent(affected[0], affected[1]):
        # swap one affected tooth with a non-adjacent healthy position
        for candidate in teeth:
            if stages[candidate] == RblStage.NO_BONE_LOSS and not teeth_adjacent(
                candidate, affected[0]
            ) and candidate != affected[1]:
                stages[candidate], stages[affected[1]] = (
                    stages[affected[1]],
                    stages[candidate],
                )
                break
        else:
            raise InfeasibleMixError("cannot place 2 affected teeth non-adjacently")
    return stages


def truth_assessments(case_teeth: dict[int, ToothTruth]) -> list[ToothAssessment]:
    """Convert merged tooth truths into assessments for the diagnosis rules."""
    out = []
    for fdi in sorted(case_teeth):
        truth = case_teeth[fdi]
        sites = {}
        for site in truth.sites:
            sites[site.side] = SiteMeasurement(
                side=site.side,
                cej_point=site.cej_px,
                bone_point=site.bone_px,
                apex_point=site.apex_px,
                len1_mm=site.len1_mm,
                len2_mm=site.len2_mm,
                rbl_percent=site.rbl_percent,
            )
        out.append(
            ToothAssessment(
                tooth_fdi=fdi,
                mesial=sites.get("mesial"),
                distal=sites.get("distal"),
                tooth_rbl_percent=truth.rbl_percent,
                stage=truth.stage,
                boundary_flag=staging.boundary_flag(truth.rbl_percent),
            )
        )
    return out


def generate_case(
    n_teeth: int = 28,
    stage_mix: Optional[dict[RblStage, float]] = None,
    age: int = 45,
    seed: int = 0,
    case_id: str = "phantom-case",
    diagnosis_policy: casedx.DiagnosisPolicy = casedx.DEFAULT_POLICY,
    n_images: Optional[int] = None,
) -> tuple[CaseRecord, CaseTruth]:
    """A full-mouth phantom series with overlapping coverage and case truth.

    Teeth shared by neighboring images render with a slightly shallower
    crest in the non-governing image, so the highest-per-tooth merge rule
    does real work. The expected diagnosis applies the standard policies
    to the analytic truth. n_images can raise the image count above the
    base sliding-window coverage by adding extra overlapping views.
    """
    if stage_mix is None:
        stage_mix = {RblStage.NO_BONE_LOSS: 1.0}
    if not (1 <= age <= 130):
        raise InputError("age must be in [1, 130]")
    if n_teeth < 1:
        raise InputError("n_teeth must be >= 1")
    rng = np.random.default_rng(seed)
    teeth = _pick_teeth(n_teeth)
    counts = _stage_counts(stage_mix, n_teeth)
    stages = _assign_stages(teeth, counts, rng)

    spacing_val = rng.uniform(0.08, 0.12)
    if rng.random() < 0.3:
        spacing = PixelSpacing(spacing_val, float(np.round(spacing_val * rng.uniform(0.9, 1.1), 5)))
    else:
        spacing = PixelSpacing(spacing_val, spacing_val)

    base_specs = {
        fdi: random_tooth_spec(fdi, stages[fdi], rng) for fdi in teeth
    }

    # windows of 3 consecutive teeth stepping by 2, per arch
    arch_windows: list[tuple[str, list[int]]] = []
    for arch in ("maxilla", "mandible"):
        arch_teeth = [t for t in teeth if arch_of_fdi(t) == arch]
        if not arch_teeth:
            continue
        start = 0
        while start < len(arch_teeth):
            arch_windows.append((arch, arch_teeth[start : start + 3]))
            if start + 3 >= len(arch_teeth):
                break
            start += 2
    if n_images is not None:
        if n_images < len(arch_windows):
            raise InputError(
                f"n_images={n_images} is below the {len(arch_windows)} images "
                "needed to cover every tooth"
            )
        extras = []
        k = 0
        while len(arch_windows) + len(extras) < n_images:
            arch, window = arch_windows[k % len(arch_windows)]
            extras.append((arch, window[: max(2, len(window) - 1)]))
            k += 1
        arch_windows.extend(extras)

    records = []
    image_truths = []
    governing: dict[int, str] = {}
    for image_no, (arch, window) in enumerate(arch_windows, start=1):
        image_id = f"img-{image_no:02d}"
        base_angle = rng.uniform(-20.0, 20.0)
        specs = []
        for fdi in window:
            spec = replace(
                base_specs[fdi],
                angle_deg=float(np.clip(base_angle + rng.uniform(-6, 6), -29.5, 29.5)),
            )
            if fdi in governing:  # repeat appearance: shallower crest
                factor = rng.uniform(0.88, 0.97)
                spec = replace(
                    spec,
                    bone_drop_left=spec.bone_drop_left * factor,
                    bone_drop_right=spec.bone_drop_right * factor,
                )
            else:
                governing[fdi] = image_id
            specs.append(spec)
        record, truth = generate_image(
            specs,
            spacing=spacing,
            seed=int(rng.integers(0, 2**63 - 1)),
            image_id=image_id,
            arch=arch,
        )
        records.append(record)
        image_truths.append(truth)

    case_teeth: dict[int, ToothTruth] = {}
    for truth in image_truths:
        for tooth in truth.teeth:
            prev = case_teeth.get(tooth.tooth_fdi)
            if prev is None or tooth.rbl_percent > prev.rbl_percent:
                case_teeth[tooth.tooth_fdi] = tooth

    expected = casedx.diagnose_case(
        casedx.CaseAssessment(
            patient_age=age,
            teeth={a.tooth_fdi: a for a in truth_assessments(case_teeth)},
            provenance=dict(governing),
        ),
        diagnosis_policy,
    )
    case = CaseRecord(case_id=case_id, patient_age=age, records=tuple(records))
    truth = CaseTruth(
        case_id=case_id,
        patient_age=age,
        images=tuple(image_truths),
        case_teeth=case_teeth,
        expected_diagnosis=expected,
    )
    return case, truth


def degrade(record: ImageRecord, noise_density: float, seed: int = 0) -> ImageRecord:
    """Flip a fraction of pixels i.i.d. and sprinkle small salt speckles.

    Ground truth is unchanged; this stresses the noise-removal step.
    """
    if not (0.0 <= noise_density <= 0.05):
        raise InputError("noise_density must be in [0, 0.05]")
    if noise_density == 0.0:
        return record
    rng = np.random.default_rng(seed)
    h, w = record.bone_mask.shape
    area = h * w
    n_flips = int(round(noise_density * area))
    n_speckles = max(1, int(round(noise_density * area / 50)))
    labels_present = sorted(set(record.tooth_table))

    def flip_binary(mask: np.ndarray) -> np.ndarray:
        out = mask.copy()
        idx = rng.integers(0, area, size=n_flips)
        flat = out.reshape(-1)
        flat[idx] = ~flat[idx]
        for _ in range(n_speckles):
            cx, cy = int(rng.integers(0, w)), int(rng.integers(0, h))
            size = int(rng.integers(1, 5))
            xs = np.clip(cx + rng.integers(-1, 2, size), 0, w - 1)
            ys = np.clip(cy + rng.integers(-1, 2, size), 0, h - 1)
            out[ys, xs] = True
        return out

    def flip_labels(mask: np.ndarray) -> np.ndarray:
        out = mask.copy()
        idx = rng.integers(0, area, size=n_flips)
        flat = out.reshape(-1)
        newvals = rng.choice(labels_present, size=n_flips)
        flat[idx] = np.where(flat[idx] != 0, 0, newvals)
        for _ in range(n_speckles):
            cx, cy = int(rng.integers(0, w)), int(rng.integers(0, h))
            size = int(rng.integers(1, 5))
            xs = np.clip(cx + rng.integers(-1, 2, size), 0, w - 1)
            ys = np.clip(cy + rng.integers(-1, 2, size), 0, h - 1)
            out[ys, xs] = rng.choice(labels_present)
        return out

    return validate_image_record(
        replace(
            record,
            bone_mask=flip_binary(np.asarray(record.bone_mask)),
            cej_mask=flip_binary(np.asarray(record.cej_mask)),
            tooth_mask=flip_labels(np.asarray(record.tooth_mask)),
            allow_disconnected_labels=True,
            validation_notes=(),
        )
    )
