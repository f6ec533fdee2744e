"""Core vocabulary shared by every other module.

Masks are plain 2-D numpy arrays (bool for binary masks, small nonnegative
ints for tooth label maps) in image coordinates: origin top-left, x right,
y down. Sub-pixel points are (x, y) float pairs; pixel (i, j) covers the
half-open box [i, i+1) x [j, j+1) and has its center at (i+0.5, j+0.5).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Optional

import numpy as np
from scipy import ndimage

__all__ = [
    "InputError",
    "PixelSpacing",
    "RblStage",
    "SiteMeasurement",
    "ToothAssessment",
    "ImageRecord",
    "CaseRecord",
    "px_vector_to_mm",
    "validate_image_record",
    "to_fdi",
    "arch_of_fdi",
    "quadrant_of_fdi",
    "teeth_adjacent",
    "Reasons",
]


class InputError(ValueError):
    """Structural problem in user-supplied data (bad manifest, mask, label...)."""


LATERALITIES = ("left", "right", "unknown")
ARCHES = ("maxilla", "mandible", "unknown")
NUMBERING_SYSTEMS = ("fdi", "universal")
SIDES = ("mesial", "distal", "left-unmapped", "right-unmapped")


class Reasons:
    """Reliability reason codes attached to measurements.

    HARD reasons mean the site has no usable geometry and no RBL%.
    Soft reasons (everything else) limit interpretation but keep the ratio.
    """

    NO_SPACING = "no-spacing"
    NO_CEJ = "no-cej"
    NO_BONE = "no-bone-intersection"
    AXIS_UNDEFINED = "axis-undefined"
    BONE_BELOW_APEX = "bone-below-apex"
    ZERO_ROOT = "zero-root-length"
    APEX_AT_BORDER = "apex-at-border"
    SINGLE_ROOT_FALLBACK = "single-root-fallback"
    CROWN_MARGIN = "cej-is-crown-margin"
    MM_RULE_SKIPPED = "mm-rule-skipped"
    TOOTH_TOO_SMALL = "tooth-too-small"
    SHARED_CANDIDATES = "shared-intersection-candidates"
    DISCONNECTED_LABEL = "disconnected-label"
    EMPTY_AFTER_CLEANUP = "empty-after-cleanup"

    HARD = frozenset(
        {NO_CEJ, NO_BONE, AXIS_UNDEFINED, BONE_BELOW_APEX, ZERO_ROOT, TOOTH_TOO_SMALL,
         EMPTY_AFTER_CLEANUP}
    )


@dataclass(frozen=True)
class PixelSpacing:
    """Millimeters per pixel along image rows (vertical) and columns (horizontal)."""

    row_mm_per_px: float
    col_mm_per_px: float

    def __post_init__(self):
        for name in ("row_mm_per_px", "col_mm_per_px"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InputError(f"PixelSpacing.{name} must be finite and > 0, got {v!r}")


def px_vector_to_mm(dx: float, dy: float, spacing: PixelSpacing) -> float:
    """Physical length in mm of the pixel-space vector (dx, dy).

    Isotropic spacing factors out of the norm, exactly.
    """
    if not isinstance(spacing, PixelSpacing):
        raise InputError("spacing must be a PixelSpacing")
    if spacing.row_mm_per_px == spacing.col_mm_per_px:
        return float(spacing.row_mm_per_px * np.hypot(dx, dy))
    return float(np.hypot(dx * spacing.col_mm_per_px, dy * spacing.row_mm_per_px))


class RblStage(IntEnum):
    """Bone-loss stage with its natural severity order."""

    NO_BONE_LOSS = 0
    I = 1
    II = 2
    III = 3

    @property
    def label(self) -> str:
        return {0: "0", 1: "I", 2: "II", 3: "III"}[int(self)]

    @classmethod
    def from_label(cls, label: str) -> "RblStage":
        table = {"0": cls.NO_BONE_LOSS, "I": cls.I, "II": cls.II, "III": cls.III}
        try:
            return table[label]
        except KeyError:
            raise InputError(f"unknown stage label {label!r}") from None


@dataclass(frozen=True)
class SiteMeasurement:
    """One interproximal site: landmarks, the two line lengths, and RBL%.

    len1 is CEJ -> bone crest, len2 is CEJ -> root apex, both taken along
    the tooth axis. mm fields are None when the image carries no spacing;
    pixel lengths are always recorded. rbl_percent is None when the site
    has no usable geometry (a HARD reason is present).
    """

    side: str
    cej_point: Optional[tuple[float, float]] = None
    bone_point: Optional[tuple[float, float]] = None
    apex_point: Optional[tuple[float, float]] = None
    len1_px: Optional[float] = None
    len2_px: Optional[float] = None
    len1_mm: Optional[float] = None
    len2_mm: Optional[float] = None
    rbl_percent: Optional[float] = None
    reliable: bool = True
    reasons: tuple[str, ...] = ()

    def __post_init__(self):
        if self.side not in SIDES:
            raise InputError(f"unknown site side {self.side!r}")
        if self.rbl_percent is not None and not (0.0 <= self.rbl_percent <= 100.0):
            raise InputError(f"rbl_percent out of [0, 100]: {self.rbl_percent}")

    @property
    def measurable(self) -> bool:
        """True when the geometry produced a usable RBL ratio."""
        return self.rbl_percent is not None


@dataclass(frozen=True)
class ToothAssessment:
    """Per-tooth pair of site measurements plus the assigned stage."""

    tooth_fdi: int
    mesial: Optional[SiteMeasurement] = None
    distal: Optional[SiteMeasurement] = None
    tooth_rbl_percent: Optional[float] = None
    stage: Optional[RblStage] = None
    boundary_flag: bool = False
    flags: tuple[str, ...] = ()

    @property
    def sites(self) -> tuple[SiteMeasurement, ...]:
        return tuple(s for s in (self.mesial, self.distal) if s is not None)

    @property
    def max_len1_mm(self) -> Optional[float]:
        vals = [s.len1_mm for s in self.sites if s.len1_mm is not None]
        return max(vals) if vals else None


@dataclass(frozen=True)
class ImageRecord:
    """One radiograph's masks plus spacing/orientation metadata."""

    image_id: str
    tooth_table: dict[int, int]  # label -> tooth number (as entered)
    numbering: str  # system the tooth_table uses
    bone_mask: np.ndarray  # bool (H, W)
    tooth_mask: np.ndarray  # int (H, W), 0 = background
    cej_mask: np.ndarray  # bool (H, W)
    spacing: Optional[PixelSpacing] = None
    laterality: str = "unknown"
    arch: str = "unknown"
    crown_margin_as_cej: bool = False
    allow_disconnected_labels: bool = False
    validation_notes: tuple[str, ...] = ()

    @property
    def height(self) -> int:
        return int(self.bone_mask.shape[0])

    @property
    def width(self) -> int:
        return int(self.bone_mask.shape[1])

    def fdi_table(self) -> dict[int, int]:
        """tooth_table with tooth numbers normalized to FDI."""
        return {label: to_fdi(num, self.numbering) for label, num in self.tooth_table.items()}


@dataclass(frozen=True)
class CaseRecord:
    """A validated full-mouth series with the patient's age."""

    case_id: str
    patient_age: Optional[int]
    records: tuple[ImageRecord, ...]


def _as_locked(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    if out is arr:
        out = arr.copy()
    out.flags.writeable = False
    return out


def validate_image_record(record: ImageRecord) -> ImageRecord:
    """Check every structural invariant and return a frozen, shareable record.

    Missing spacing is tolerated (the RBL ratio is unit-free) but recorded
    as a note because the 1.5 mm no-bone-loss rule needs millimeters.
    """
    notes: list[str] = list(record.validation_notes)

    bone = np.asarray(record.bone_mask)
    tooth = np.asarray(record.tooth_mask)
    cej = np.asarray(record.cej_mask)
    for name, arr in (("bone_mask", bone), ("tooth_mask", tooth), ("cej_mask", cej)):
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError(f"{record.image_id}: {name} must be 2-D and at least 1x1")
    if not (bone.shape == tooth.shape == cej.shape):
        detail = ", ".join(
            f"{n}={a.shape[1]}x{a.shape[0]}"
            for n, a in (("bone_mask", bone), ("tooth_mask", tooth), ("cej_mask", cej))
        )
        raise InputError(f"{record.image_id}: mask dimensions differ ({detail})")

    if tooth.min() < 0:
        raise InputError(f"{record.image_id}: tooth_mask has negative labels")
    present = set(int(v) for v in np.unique(tooth)) - {0}
    known = set(record.tooth_table)
    unknown = sorted(present - known)
    if unknown:
        raise InputError(
            f"{record.image_id}: tooth_mask labels {unknown} missing from tooth_table"
        )

    if record.numbering not in NUMBERING_SYSTEMS:
        raise InputError(f"{record.image_id}: unknown numbering system {record.numbering!r}")
    for label, num in record.tooth_table.items():
        to_fdi(num, record.numbering)  # raises on invalid numbers
        if label <= 0:
            raise InputError(f"{record.image_id}: tooth label {label} must be positive")
    fdi_numbers = list(record.fdi_table().values())
    if len(set(fdi_numbers)) != len(fdi_numbers):
        raise InputError(f"{record.image_id}: conflicting tooth table (duplicate tooth numbers)")

    if record.laterality not in LATERALITIES:
        raise InputError(f"{record.image_id}: unknown laterality {record.laterality!r}")
    if record.arch not in ARCHES:
        raise InputError(f"{record.image_id}: unknown arch {record.arch!r}")

    eight = np.ones((3, 3), bool)
    for label in sorted(present):
        n_comp = ndimage.label(tooth == label, structure=eight)[1]
        if n_comp > 1:
            if not record.allow_disconnected_labels:
                raise InputError(
                    f"{record.image_id}: label {label} is disconnected "
                    f"({n_comp} components) and the record is not flagged to allow it"
                )
            notes.append(f"{Reasons.DISCONNECTED_LABEL}:{label}")

    if record.spacing is None:
        notes.append(Reasons.NO_SPACING)

    return replace(
        record,
        bone_mask=_as_locked(bone.astype(bool)),
        tooth_mask=_as_locked(tooth.astype(np.int32)),
        cej_mask=_as_locked(cej.astype(bool)),
        validation_notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# Tooth numbering.
#
# Universal numbers run 1..32 starting at the upper-right third molar; FDI
# uses quadrant-digit + position-digit. Everything internal is FDI.
# ---------------------------------------------------------------------------

_FDI_UPPER = (18, 17, 16, 15, 14, 13, 12, 11, 21, 22, 23, 24, 25, 26, 27, 28)
_FDI_LOWER = (48, 47, 46, 45, 44, 43, 42, 41, 31, 32, 33, 34, 35, 36, 37, 38)
ARCH_SEQUENCES = {"maxilla": _FDI_UPPER, "mandible": _FDI_LOWER}

_UNIVERSAL_TO_FDI = {u: fdi for u, fdi in enumerate(_FDI_UPPER, start=1)}
_UNIVERSAL_TO_FDI.update({u: fdi for u, fdi in enumerate(reversed(_FDI_LOWER), start=17)})
_FDI_TO_UNIVERSAL = {fdi: u for u, fdi in _UNIVERSAL_TO_FDI.items()}


def to_fdi(number: int, system: str) -> int:
    """Normalize a tooth number from the given system to FDI."""
    number = int(number)
    if system == "fdi":
        if number not in _FDI_TO_UNIVERSAL:
            raise InputError(f"invalid FDI tooth number {number}")
        return number
    if system == "universal":
        try:
            return _UNIVERSAL_TO_FDI[number]
        except KeyError:
            raise InputError(f"invalid Universal tooth number {number}") from None
    raise InputError(f"unknown numbering system {system!r}")


def quadrant_of_fdi(fdi: int) -> int:
    return fdi // 10


def arch_of_fdi(fdi: int) -> str:
    return "maxilla" if quadrant_of_fdi(fdi) in (1, 2) else "mandible"


def teeth_adjacent(fdi_a: int, fdi_b: int) -> bool:
    """True when the two teeth occupy consecutive positions in their arch.

    Teeth in different arches are never adjacent; a missing tooth between
    two positions keeps them non-adjacent (the positions stay as in the
    full standard sequence).
    """
    for seq in ARCH_SEQUENCES.values():
        if fdi_a in seq and fdi_b in seq:
            return abs(seq.index(fdi_a) - seq.index(fdi_b)) == 1
    return False
