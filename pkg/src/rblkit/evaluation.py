"""Evaluation harness: compare predictions against references on disk.

seg mode pairs same-named mask PNGs from two directories. stage mode pairs
analysis/diagnosis reports with phantom truth files by case_id and scores
per-tooth stage assignment (Table-2-shaped output). case mode pairs
diagnosis reports with truth files and reports whole-case accuracy.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from . import metrics
from .domain import InputError, RblStage
from .ingest import read_binary_mask
from .reports import SCHEMA_VERSION, load_report
from .staging import StagingPolicy, stages_compatible

__all__ = ["eval_seg", "eval_stage", "eval_case"]

STAGE_CLASSES = ("0", "I", "II", "III")


def _match_files(pred_dir: Path, ref_dir: Path, pattern: str) -> list[tuple[str, Path, Path]]:
    pred = {p.name: p for p in sorted(Path(pred_dir).glob(pattern))}
    ref = {p.name: p for p in sorted(Path(ref_dir).glob(pattern))}
    missing = sorted(set(pred) ^ set(ref))
    if missing:
        raise InputError(f"unmatched files between directories: {', '.join(missing)}")
    if not pred:
        raise InputError(f"no files matching {pattern} found")
    return [(name, pred[name], ref[name]) for name in sorted(pred)]


def eval_seg(pred_dir, ref_dir) -> dict:
    """Overlap scores per matched mask PNG, plus their means."""
    rows = []
    sums = {"dice": 0.0, "jaccard": 0.0, "pixel_accuracy": 0.0}
    pairs = _match_files(pred_dir, ref_dir, "*.png")
    for name, pred_path, ref_path in pairs:
        pred = read_binary_mask(pred_path)
        ref = read_binary_mask(ref_path)
        if pred.shape != ref.shape:
            raise InputError(f"{name}: prediction {pred.shape} vs reference {ref.shape}")
        row = {
            "name": name,
            "dice": metrics.dice(pred, ref),
            "jaccard": metrics.jaccard(pred, ref),
            "pixel_accuracy": metrics.pixel_accuracy(pred, ref),
            "degenerate": bool(not pred.any() and not ref.any()),
        }
        rows.append(row)
        for key in sums:
            sums[key] += row[key]
    means = {key: sums[key] / len(rows) for key in sums}
    for row in rows:
        for key in ("dice", "jaccard", "pixel_accuracy"):
            row[key] = round(row[key], 6)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "eval-seg",
        "n_pairs": len(rows),
        "per_mask": rows,
        "means": {k: round(v, 6) for k, v in means.items()},
    }


def _load_by_case(directory, kinds: tuple[str, ...]) -> dict[str, dict]:
    out = {}
    for path in sorted(Path(directory).glob("*.json")):
        data = load_report(path)
        if data.get("kind") in kinds:
            case_id = data.get("case_id")
            if case_id in out:
                raise InputError(f"duplicate case_id {case_id!r} in {directory}")
            out[case_id] = data
    if not out:
        raise InputError(f"no usable {'/'.join(kinds)} files in {directory}")
    return out


def _paired_cases(pred_dir, ref_dir, pred_kinds, ref_kinds) -> list[tuple[str, dict, dict]]:
    pred = _load_by_case(pred_dir, pred_kinds)
    ref = _load_by_case(ref_dir, ref_kinds)
    missing = sorted(set(pred) ^ set(ref))
    if missing:
        raise InputError(f"unmatched case ids: {', '.join(str(m) for m in missing)}")
    return [(cid, pred[cid], ref[cid]) for cid in sorted(pred)]


def _teeth_by_image(report: dict) -> dict[tuple[str, int], dict]:
    out = {}
    for image in report.get("images", []):
        for tooth in image.get("teeth", []):
            out[(image["image_id"], tooth["tooth_fdi"])] = tooth
    return out


def eval_stage(pred_dir, ref_dir, policy: StagingPolicy = StagingPolicy(),
               boundary_tolerance: bool = True) -> dict:
    """Per-tooth stage agreement in the shape of a per-stage rate table.

    Pairs every (image, tooth) present in both prediction and truth; teeth
    the engine could not stage are skipped and counted. With the boundary
    tolerance on, predictions whose RBL% lies within the policy band of a
    threshold count as agreeing with the reference across that threshold.
    """
    pairs = _paired_cases(pred_dir, ref_dir, ("analysis", "diagnosis"), ("phantom_truth",))
    ref_stages: list[str] = []
    pred_stages: list[str] = []
    effective: list[str] = []
    scores: dict[str, list[float]] = {c: [] for c in STAGE_CLASSES}
    labels: dict[str, list[bool]] = {c: [] for c in STAGE_CLASSES}
    pred_rbl: list[float] = []
    ref_rbl: list[float] = []
    skipped = 0
    for _, pred_report, ref_report in pairs:
        pred_teeth = _teeth_by_image(pred_report)
        ref_teeth = _teeth_by_image(ref_report)
        for key in sorted(set(pred_teeth) & set(ref_teeth)):
            pred_tooth = pred_teeth[key]
            ref_tooth = ref_teeth[key]
            if pred_tooth.get("stage") is None:
                skipped += 1
                continue
            pred_stage = RblStage.from_label(pred_tooth["stage"])
            ref_stage = RblStage.from_label(ref_tooth["stage"])
            rbl = pred_tooth.get("rbl_percent")
            if rbl is not None and ref_tooth.get("rbl_percent") is not None:
                pred_rbl.append(rbl)
                ref_rbl.append(ref_tooth["rbl_percent"])
            ref_stages.append(ref_stage.label)
            pred_stages.append(pred_stage.label)
            if stages_compatible(pred_stage, rbl, ref_stage, policy, boundary_tolerance):
                effective.append(ref_stage.label)
            else:
                effective.append(pred_stage.label)
            mm = max(
                (s.get("len1_mm") for s in pred_tooth.get("sites", [])
                 if s.get("len1_mm") is not None),
                default=None,
            )
            for target in STAGE_CLASSES:
                if target == "0":
                    if mm is None:
                        continue
                    scores[target].append(-mm)
                else:
                    if rbl is None:
                        continue
                    scores[target].append(rbl)
                labels[target].append(ref_stage.label == target)
    if not ref_stages:
        raise InputError("no comparable (image, tooth) pairs found")

    cm_plain = metrics.ConfusionMatrix.from_pairs(ref_stages, pred_stages, STAGE_CLASSES)
    cm_eff = metrics.ConfusionMatrix.from_pairs(ref_stages, effective, STAGE_CLASSES)
    cm_rates = cm_eff if boundary_tolerance else cm_plain

    per_stage = []
    for target in STAGE_CLASSES:
        r = metrics.rates(cm_rates, target)
        try:
            auc = metrics.auroc(scores[target], labels[target])
        except InputError:
            auc = None
        per_stage.append(
            {
                "stage": target,
                "auroc": None if auc is None else round(auc, 6),
                "sensitivity": None if r.sensitivity is None else round(r.sensitivity, 6),
                "specificity": None if r.specificity is None else round(r.specificity, 6),
                "accuracy": None if r.accuracy is None else round(r.accuracy, 6),
                "flags": list(r.flags),
            }
        )
    rbl_t_test = None
    if len(pred_rbl) >= 2:
        t, p = metrics.two_sample_t_test(pred_rbl, ref_rbl, paired=True)
        rbl_t_test = {
            "paired": True,
            "n": len(pred_rbl),
            "t": None if math.isinf(t) else round(t, 6),
            "p_two_sided": round(p, 6),
        }
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "eval-stage",
        "n_teeth": len(ref_stages),
        "n_skipped_unstaged": skipped,
        "boundary_tolerance": boundary_tolerance,
        "per_stage": per_stage,
        "kappa": round(metrics.cohens_kappa(cm_plain), 6),
        "kappa_with_tolerance": round(metrics.cohens_kappa(cm_eff), 6),
        "rbl_t_test": rbl_t_test,
        "confusion": {
            "classes": list(STAGE_CLASSES),
            "counts": cm_plain.counts.tolist(),
        },
    }


def eval_case(pred_dir, ref_dir) -> dict:
    """Whole-case diagnosis accuracy: matching cases / total cases."""
    pairs = _paired_cases(pred_dir, ref_dir, ("diagnosis",), ("phantom_truth",))
    rows = []
    n_match = 0
    for case_id, pred_report, ref_report in pairs:
        pred = pred_report.get("diagnosis", {})
        ref = ref_report.get("expected_diagnosis", {})
        fields = ("is_periodontitis", "extent", "stage", "grade")
        mismatches = [f for f in fields if pred.get(f) != ref.get(f)]
        match = not mismatches
        n_match += int(match)
        rows.append(
            {
                "case_id": case_id,
                "match": match,
                "mismatched_fields": mismatches,
                "predicted": {f: pred.get(f) for f in fields},
                "expected": {f: ref.get(f) for f in fields},
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "eval-case",
        "n_cases": len(rows),
        "n_matching": n_match,
        "accuracy": round(n_match / len(rows), 6),
        "per_case": rows,
    }
