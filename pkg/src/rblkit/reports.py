"""Report and ground-truth file schemas (versioned JSON).

Every report embeds the complete effective configuration, floats are
rounded to four decimals before serialization, and keys are sorted, so a
re-run on identical input produces byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from . import phantom
from .casedx import CaseDiagnosis, DiagnosisPolicy
from .domain import CaseRecord, RblStage, SiteMeasurement, ToothAssessment
from .ingest import write_mask_png
from .maskproc import MaskprocParams
from .pipeline import AnalysisConfig, CaseAnalysis
from .staging import StagingPolicy

__all__ = [
    "SCHEMA_VERSION",
    "render_json",
    "write_report",
    "build_analysis_report",
    "build_diagnosis_report",
    "truth_to_dict",
    "write_phantom_case",
    "load_report",
]

SCHEMA_VERSION = 1


def _r(value: Optional[float], digits: int = 4) -> Optional[float]:
    if value is None:
        return None
    return round(float(value), digits)


def _point(pt: Optional[tuple[float, float]]) -> Optional[list[float]]:
    if pt is None:
        return None
    return [_r(pt[0]), _r(pt[1])]


def _stage_label(stage: Optional[RblStage]) -> Optional[str]:
    return None if stage is None else stage.label


def render_json(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_report(obj: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_json(obj))


def load_report(path) -> dict:
    return json.loads(Path(path).read_text())


def policy_echo(config: AnalysisConfig) -> dict:
    mp: MaskprocParams = config.maskproc
    sp: StagingPolicy = config.staging
    dp: DiagnosisPolicy = config.diagnosis
    return {
        "maskproc": {
            "sigma": _r(mp.sigma),
            "sigma_cej": _r(mp.sigma_cej),
            "bin_threshold": _r(mp.bin_threshold),
            "min_area_bone": mp.min_area_bone,
            "min_area_cej": mp.min_area_cej,
        },
        "staging": {
            "stage1_max_percent": _r(sp.stage1_max_percent),
            "stage2_max_percent": _r(sp.stage2_max_percent),
            "no_loss_max_mm": _r(sp.no_loss_max_mm),
            "boundary_band_percent": _r(sp.boundary_band_percent),
        },
        "diagnosis": {
            "extent_generalized_min_fraction": _r(dp.extent_generalized_min_fraction),
            "grade_a_max_ratio": _r(dp.grade_a_max_ratio),
            "grade_b_max_ratio": _r(dp.grade_b_max_ratio),
            "min_teeth_at_stage": dp.min_teeth_at_stage,
            "extent_counts_at_or_above": dp.extent_counts_at_or_above,
        },
        "conventions": {
            "lengths_along_axis": True,
            "intersection_band_px": 1,
        },
    }


def _site_dict(site: SiteMeasurement) -> dict:
    return {
        "side": site.side,
        "cej": _point(site.cej_point),
        "bone": _point(site.bone_point),
        "apex": _point(site.apex_point),
        "len1_px": _r(site.len1_px),
        "len2_px": _r(site.len2_px),
        "len1_mm": _r(site.len1_mm),
        "len2_mm": _r(site.len2_mm),
        "rbl_percent": _r(site.rbl_percent),
        "reliable": site.reliable,
        "reasons": sorted(site.reasons),
    }


def _tooth_dict(tooth: ToothAssessment) -> dict:
    return {
        "tooth_fdi": tooth.tooth_fdi,
        "rbl_percent": _r(tooth.tooth_rbl_percent),
        "stage": _stage_label(tooth.stage),
        "boundary_flag": tooth.boundary_flag,
        "flags": sorted(tooth.flags),
        "sites": [_site_dict(s) for s in tooth.sites],
    }


def build_analysis_report(case: CaseRecord, analysis: CaseAnalysis,
                          config: AnalysisConfig) -> dict:
    by_id = {r.image_id: r for r in case.records}
    images = []
    for img in analysis.images:
        record = by_id[img.image_id]
        spacing = record.spacing
        images.append(
            {
                "image_id": img.image_id,
                "width": record.width,
                "height": record.height,
                "spacing_mm_per_px": None
                if spacing is None
                else [_r(spacing.row_mm_per_px, 6), _r(spacing.col_mm_per_px, 6)],
                "arch": record.arch,
                "laterality": record.laterality,
                "teeth": [_tooth_dict(t) for t in img.assessments],
                "warnings": sorted(img.warnings),
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "analysis",
        "case_id": case.case_id,
        "policy": policy_echo(config),
        "images": images,
    }


def _diagnosis_dict(diagnosis: CaseDiagnosis) -> dict:
    rationale = dict(diagnosis.rationale)
    for key in ("teeth_at_case_stage_fraction", "worst_rbl_percent", "grade_ratio"):
        if key in rationale:
            rationale[key] = _r(rationale[key])
    return {
        "is_periodontitis": diagnosis.is_periodontitis,
        "extent": diagnosis.extent,
        "stage": _stage_label(diagnosis.stage),
        "grade": diagnosis.grade,
        "rationale": rationale,
        "warnings": sorted(diagnosis.warnings),
    }


def build_diagnosis_report(case: CaseRecord, analysis: CaseAnalysis,
                           config: AnalysisConfig) -> dict:
    report = build_analysis_report(case, analysis, config)
    report["kind"] = "diagnosis"
    report["patient_age"] = case.patient_age
    merged = analysis.case_assessment
    report["case_teeth"] = [
        {
            "tooth_fdi": fdi,
            "rbl_percent": _r(merged.teeth[fdi].tooth_rbl_percent),
            "stage": _stage_label(merged.teeth[fdi].stage),
            "boundary_flag": merged.teeth[fdi].boundary_flag,
            "source_image": merged.provenance[fdi],
        }
        for fdi in sorted(merged.teeth)
    ]
    report["diagnosis"] = _diagnosis_dict(analysis.diagnosis)
    return report


# ---------------------------------------------------------------------------
# Phantom ground-truth files (public test contract)
# ---------------------------------------------------------------------------


def _truth_site_dict(site: phantom.SiteTruth) -> dict:
    return {
        "side": site.side,
        "cej": _point(site.cej_px),
        "bone": _point(site.bone_px),
        "apex": _point(site.apex_px),
        "len1_mm": _r(site.len1_mm),
        "len2_mm": _r(site.len2_mm),
        "rbl_percent": _r(site.rbl_percent),
        "stage": site.stage.label,
    }


def _truth_tooth_dict(tooth: phantom.ToothTruth) -> dict:
    return {
        "tooth_fdi": tooth.tooth_fdi,
        "rbl_percent": _r(tooth.rbl_percent),
        "stage": tooth.stage.label,
        "sites": [_truth_site_dict(s) for s in tooth.sites],
    }


def truth_to_dict(truth: phantom.CaseTruth) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "phantom_truth",
        "case_id": truth.case_id,
        "patient_age": truth.patient_age,
        "images": [
            {
                "image_id": img.image_id,
                "teeth": [_truth_tooth_dict(t) for t in img.teeth],
            }
            for img in truth.images
        ],
        "case_teeth": [
            _truth_tooth_dict(truth.case_teeth[fdi]) for fdi in sorted(truth.case_teeth)
        ],
        "expected_diagnosis": _diagnosis_dict(truth.expected_diagnosis),
    }


def write_phantom_case(out_dir, case: CaseRecord, truth: phantom.CaseTruth) -> Path:
    """Write a complete on-disk case in the ingest format plus truth.json.

    Returns the manifest path.
    """
    out_dir = Path(out_dir)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    entries = []
    for record in case.records:
        bone_path = f"masks/{record.image_id}_bone.png"
        tooth_path = f"masks/{record.image_id}_tooth.png"
        cej_path = f"masks/{record.image_id}_cej.png"
        write_mask_png(record.bone_mask, out_dir / bone_path)
        write_mask_png(record.tooth_mask, out_dir / tooth_path)
        write_mask_png(record.cej_mask, out_dir / cej_path)
        spacing = record.spacing
        entries.append(
            {
                "image_id": record.image_id,
                "spacing_mm_per_px": None
                if spacing is None
                else [spacing.row_mm_per_px, spacing.col_mm_per_px],
                "laterality": record.laterality,
                "arch": record.arch,
                "numbering": record.numbering,
                "tooth_table": {str(k): v for k, v in sorted(record.tooth_table.items())},
                "bone_mask": bone_path,
                "tooth_mask": tooth_path,
                "cej_mask": cej_path,
            }
        )
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "case_id": case.case_id,
        "patient_age": case.patient_age,
        "images": entries,
    }
    manifest_path = out_dir / "case.json"
    write_report(manifest, manifest_path)
    write_report(truth_to_dict(truth), out_dir / "truth.json")
    return manifest_path
