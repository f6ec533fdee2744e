"""Drivers that run the full measurement sequence over images and cases."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import casedx, geometry, staging
from .domain import (
    CaseRecord,
    ImageRecord,
    Reasons,
    RblStage,
    SiteMeasurement,
    ToothAssessment,
)
from .maskproc import MaskprocParams, boundary_mask, clean_binary, largest_component

__all__ = ["AnalysisConfig", "ImageAnalysis", "CaseAnalysis", "assess_image", "assess_case"]

SHARED_CANDIDATE_DISTANCE_PX = 2.0


@dataclass(frozen=True)
class AnalysisConfig:
    maskproc: MaskprocParams = field(default_factory=MaskprocParams)
    staging: staging.StagingPolicy = field(default_factory=staging.StagingPolicy)
    diagnosis: casedx.DiagnosisPolicy = field(default_factory=casedx.DiagnosisPolicy)


@dataclass(frozen=True)
class ImageAnalysis:
    image_id: str
    assessments: tuple[ToothAssessment, ...]
    warnings: tuple[str, ...]

    @property
    def has_unmeasurable_teeth(self) -> bool:
        return any(a.tooth_rbl_percent is None for a in self.assessments)


@dataclass(frozen=True)
class CaseAnalysis:
    case_id: str
    images: tuple[ImageAnalysis, ...]
    case_assessment: casedx.CaseAssessment
    diagnosis: casedx.CaseDiagnosis

    @property
    def has_unmeasurable_teeth(self) -> bool:
        return any(img.has_unmeasurable_teeth for img in self.images)


def _with_reason(site: SiteMeasurement, reason: str) -> SiteMeasurement:
    if reason in site.reasons:
        return site
    return replace(site, reasons=site.reasons + (reason,), reliable=False)


def _assemble_assessment(
    measurement: geometry.ToothMeasurement,
    policy: staging.StagingPolicy,
    extra_flags: tuple[str, ...] = (),
) -> ToothAssessment:
    sites = list(measurement.sites)
    site_stages = []
    staged_sites = []
    for site in sites:
        if site.rbl_percent is None:
            staged_sites.append(site)
            continue
        if site.len1_mm is None:
            site = _with_reason(site, Reasons.MM_RULE_SKIPPED)
        site_stages.append(staging.stage_site(site.rbl_percent, site.len1_mm, policy))
        staged_sites.append(site)

    stage = None
    if site_stages:
        stage = max(site_stages)
    rbl = measurement.tooth_rbl_percent
    flag = staging.boundary_flag(rbl, policy) if rbl is not None else False

    slots: dict[str, SiteMeasurement] = {}
    for site in staged_sites:
        key = "mesial" if site.side in ("mesial", "left-unmapped") else "distal"
        slots[key] = site
    return ToothAssessment(
        tooth_fdi=measurement.tooth_fdi,
        mesial=slots.get("mesial"),
        distal=slots.get("distal"),
        tooth_rbl_percent=rbl,
        stage=stage,
        boundary_flag=flag,
        flags=tuple(measurement.flags) + tuple(extra_flags),
    )


def _shared_candidate_flags(
    measurements: list[geometry.ToothMeasurement],
) -> dict[int, tuple[str, ...]]:
    """Teeth whose chosen crossings sit within 2 px of another tooth's."""
    points: list[tuple[int, np.ndarray]] = []
    for m in measurements:
        for site in m.sites:
            for pt in (site.cej_point, site.bone_point):
                if pt is not None:
                    points.append((m.tooth_fdi, np.asarray(pt)))
    flagged: set[int] = set()
    for i, (fdi_a, pa) in enumerate(points):
        for fdi_b, pb in points[i + 1 :]:
            if fdi_a == fdi_b:
                continue
            if float(np.hypot(*(pa - pb))) <= SHARED_CANDIDATE_DISTANCE_PX:
                flagged.add(fdi_a)
                flagged.add(fdi_b)
    return {fdi: (Reasons.SHARED_CANDIDATES,) for fdi in flagged}


def assess_image(record: ImageRecord, config: AnalysisConfig) -> ImageAnalysis:
    """Post-process one record's masks and measure every listed tooth."""
    params = config.maskproc
    bone = clean_binary(
        record.bone_mask, params.sigma, params.bin_threshold, params.min_area_bone
    )
    cej = clean_binary(
        record.cej_mask, params.sigma_cej, params.bin_threshold, params.min_area_cej
    )
    bone_contour = boundary_mask(bone)

    fdi_table = record.fdi_table()
    measurements: list[geometry.ToothMeasurement] = []
    for label in sorted(fdi_table, key=lambda lb: fdi_table[lb]):
        fdi = fdi_table[label]
        region = clean_binary(
            record.tooth_mask == label, params.sigma, params.bin_threshold, params.min_area_bone
        )
        region = largest_component(region)
        if not region.any():
            measurements.append(
                geometry.ToothMeasurement(
                    tooth_fdi=fdi,
                    axis=None,
                    sites=(),
                    tooth_rbl_percent=None,
                    flags=(Reasons.EMPTY_AFTER_CLEANUP,),
                )
            )
            continue
        measurements.append(
            geometry.measure_tooth(
                region,
                bone_contour,
                cej,
                record.spacing,
                fdi,
                crown_margin_as_cej=record.crown_margin_as_cej,
            )
        )

    shared = _shared_candidate_flags(measurements)
    assessments = tuple(
        _assemble_assessment(m, config.staging, extra_flags=shared.get(m.tooth_fdi, ()))
        for m in measurements
    )

    warnings = []
    for a in assessments:
        if a.tooth_rbl_percent is None:
            reasons = set(a.flags)
            for s in a.sites:
                reasons.update(s.reasons)
            hard = sorted(reasons & Reasons.HARD) or sorted(reasons)
            warnings.append(f"tooth {a.tooth_fdi} unmeasurable: {', '.join(hard)}")
    return ImageAnalysis(
        image_id=record.image_id,
        assessments=assessments,
        warnings=tuple(warnings) + tuple(record.validation_notes),
    )


def assess_case(case: CaseRecord, config: AnalysisConfig, jobs: int = 1) -> CaseAnalysis:
    """Analyze every image, merge per tooth, and diagnose the case.

    Images fan out to a small thread pool when jobs > 1; results are
    assembled in image_id order, so the output is identical either way.
    """
    records = sorted(case.records, key=lambda r: r.image_id)
    if jobs > 1 and len(records) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            images = list(pool.map(lambda r: assess_image(r, config), records))
    else:
        images = [assess_image(r, config) for r in records]
    images.sort(key=lambda a: a.image_id)

    pairs = [
        (img.image_id, tooth) for img in images for tooth in img.assessments
    ]
    assessment = casedx.merge_across_images(pairs, patient_age=case.patient_age)
    diagnosis = casedx.diagnose_case(assessment, config.diagnosis)
    return CaseAnalysis(
        case_id=case.case_id,
        images=tuple(images),
        case_assessment=assessment,
        diagnosis=diagnosis,
    )
