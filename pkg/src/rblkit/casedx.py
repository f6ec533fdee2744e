"""Whole-case diagnosis: merge per-image tooth assessments, decide
periodontitis yes/no, extent, stage, and grade.

The non-paper constants (30% extent threshold, 0.25/1.0 grade cutoffs)
come from the 2018 classification's published criteria and live in
DiagnosisPolicy so every report can echo them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .domain import InputError, RblStage, ToothAssessment, teeth_adjacent

__all__ = [
    "DiagnosisPolicy",
    "CaseAssessment",
    "CaseDiagnosis",
    "merge_across_images",
    "is_periodontitis_case",
    "case_stage",
    "case_extent",
    "case_grade",
    "diagnose_case",
]


@dataclass(frozen=True)
class DiagnosisPolicy:
    extent_generalized_min_fraction: float = 0.30
    grade_a_max_ratio: float = 0.25  # worst RBL% / age strictly below -> A
    grade_b_max_ratio: float = 1.0  # inclusive upper bound for B
    min_teeth_at_stage: int = 1
    extent_counts_at_or_above: bool = False  # count teeth at >= case stage instead of ==

    def __post_init__(self):
        if not (0.0 < self.extent_generalized_min_fraction <= 1.0):
            raise InputError("extent threshold must be in (0, 1]")
        if not (0.0 < self.grade_a_max_ratio < self.grade_b_max_ratio):
            raise InputError("need 0 < grade_a_max_ratio < grade_b_max_ratio")
        if self.min_teeth_at_stage < 1:
            raise InputError("min_teeth_at_stage must be >= 1")


DEFAULT_POLICY = DiagnosisPolicy()


@dataclass(frozen=True)
class CaseAssessment:
    """One merged assessment per tooth, with the image that supplied it."""

    patient_age: Optional[int]
    teeth: dict[int, ToothAssessment]  # keyed by FDI number
    provenance: dict[int, str]  # FDI -> image_id of the governing measurement

    def assessed_teeth(self) -> list[int]:
        return sorted(fdi for fdi, t in self.teeth.items() if t.stage is not None)


@dataclass(frozen=True)
class CaseDiagnosis:
    is_periodontitis: bool
    extent: Optional[str] = None  # "localized" | "generalized"
    stage: Optional[RblStage] = None
    grade: Optional[str] = None  # "A" | "B" | "C"
    rationale: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()


def _sort_key(rbl: Optional[float], stage: Optional[RblStage], image_id: str):
    # best first: higher RBL%, then higher stage, then lexicographically
    # smaller image id (deterministic tie-break)
    return (
        -(rbl if rbl is not None else -1.0),
        -(int(stage) if stage is not None else -1),
        image_id,
    )


def merge_across_images(
    per_image: list[tuple[str, ToothAssessment]],
    patient_age: Optional[int] = None,
) -> CaseAssessment:
    """Keep, per tooth, the assessment with the highest RBL%.

    Ties fall to the higher stage, then to the lexicographically smallest
    image_id, so input order never matters.
    """
    best: dict[int, tuple[tuple, str, ToothAssessment]] = {}
    for image_id, tooth in per_image:
        key = _sort_key(tooth.tooth_rbl_percent, tooth.stage, image_id)
        fdi = tooth.tooth_fdi
        if fdi not in best or key < best[fdi][0]:
            best[fdi] = (key, image_id, tooth)
    teeth = {fdi: entry[2] for fdi, entry in best.items()}
    provenance = {fdi: entry[1] for fdi, entry in best.items()}
    return CaseAssessment(patient_age=patient_age, teeth=teeth, provenance=provenance)


def _affected(case: CaseAssessment) -> list[int]:
    return [
        fdi
        for fdi, tooth in case.teeth.items()
        if tooth.stage is not None and tooth.stage >= RblStage.I
    ]


def is_periodontitis_case(case: CaseAssessment) -> bool:
    """True when detectable interdental bone loss hits >= 2 non-adjacent teeth."""
    affected = sorted(_affected(case))
    for i, a in enumerate(affected):
        for b in affected[i + 1 :]:
            if not teeth_adjacent(a, b):
                return True
    return False


def case_stage(case: CaseAssessment, policy: DiagnosisPolicy = DEFAULT_POLICY) -> RblStage:
    """The worst tooth stage, stepped down until enough teeth support it.

    With min_teeth_at_stage = n, a candidate stage is accepted once at
    least n assessed teeth sit at that stage or worse.
    """
    stages = [t.stage for t in case.teeth.values() if t.stage is not None]
    if not stages:
        raise InputError("case_stage: no staged teeth")
    for candidate in (RblStage.III, RblStage.II, RblStage.I):
        if sum(1 for s in stages if s >= candidate) >= policy.min_teeth_at_stage:
            return candidate
    return RblStage.I


def case_extent(
    case: CaseAssessment,
    stage: RblStage,
    policy: DiagnosisPolicy = DEFAULT_POLICY,
) -> tuple[str, float]:
    """Localized vs generalized from the fraction of teeth at the case stage."""
    assessed = [t for t in case.teeth.values() if t.stage is not None]
    if not assessed:
        raise InputError("case_extent: no assessed teeth")
    if policy.extent_counts_at_or_above:
        hits = sum(1 for t in assessed if t.stage >= stage)
    else:
        hits = sum(1 for t in assessed if t.stage == stage)
    fraction = hits / len(assessed)
    extent = (
        "generalized" if fraction >= policy.extent_generalized_min_fraction else "localized"
    )
    return extent, fraction


def _worst_rbl(case: CaseAssessment) -> Optional[float]:
    vals = [
        t.tooth_rbl_percent for t in case.teeth.values() if t.tooth_rbl_percent is not None
    ]
    return max(vals) if vals else None


def case_grade(
    case: CaseAssessment, policy: DiagnosisPolicy = DEFAULT_POLICY
) -> tuple[Optional[str], Optional[float]]:
    """Indirect-evidence grade from worst RBL% divided by age.

    Returns (grade, ratio); grade is None (flagged by the caller) when the
    age or every RBL% is missing.
    """
    worst = _worst_rbl(case)
    if case.patient_age is None or worst is None:
        return None, None
    ratio = worst / case.patient_age
    if ratio < policy.grade_a_max_ratio:
        return "A", ratio
    if ratio <= policy.grade_b_max_ratio:
        return "B", ratio
    return "C", ratio


def diagnose_case(
    case: CaseAssessment, policy: DiagnosisPolicy = DEFAULT_POLICY
) -> CaseDiagnosis:
    """Assemble the full diagnosis with its reasoning trace."""
    warnings: list[str] = []
    if not is_periodontitis_case(case):
        return CaseDiagnosis(
            is_periodontitis=False,
            rationale={
                "affected_teeth": sorted(_affected(case)),
                "assessed_teeth": case.assessed_teeth(),
            },
        )
    stage = case_stage(case, policy)
    extent, fraction = case_extent(case, stage, policy)
    grade, ratio = case_grade(case, policy)
    if grade is None:
        warnings.append("grade-undefined: patient age or RBL% unavailable")
    worst = _worst_rbl(case)
    return CaseDiagnosis(
        is_periodontitis=True,
        extent=extent,
        stage=stage,
        grade=grade,
        rationale={
            "affected_teeth": sorted(_affected(case)),
            "assessed_teeth": case.assessed_teeth(),
            "teeth_at_case_stage_fraction": fraction,
            "worst_rbl_percent": worst,
            "grade_ratio": ratio,
        },
        warnings=tuple(warnings),
    )
