"""Command-line interface.

Subcommands: analyze, diagnose, eval, phantom, overlay. Exit codes:
0 = success, 1 = at least one tooth unmeasurable (the report is still
written), 2 = input error. Errors also land on stderr as JSON records.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import evaluation, phantom, reports
from .casedx import DiagnosisPolicy
from .domain import InputError, RblStage
from .ingest import load_case
from .maskproc import MaskprocParams
from .overlay import write_overlays
from .pipeline import AnalysisConfig, assess_case
from .staging import StagingPolicy

__all__ = ["main", "build_parser"]


def _error_record(exc: Exception) -> str:
    return json.dumps({"error": type(exc).__name__, "detail": str(exc)}, sort_keys=True)


def _add_analysis_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--policy", type=Path, default=None,
                     help="JSON file with maskproc/staging/diagnosis overrides")
    sub.add_argument("--sigma", type=float, default=None,
                     help="Gaussian sigma for bone/tooth masks (px)")
    sub.add_argument("--sigma-cej", type=float, default=None,
                     help="Gaussian sigma for the CEJ mask (px, default 0)")
    sub.add_argument("--bin-threshold", type=float, default=None,
                     help="re-binarization threshold after smoothing")
    sub.add_argument("--min-area-bone", type=int, default=None,
                     help="minimum component area for bone/tooth masks (px)")
    sub.add_argument("--min-area-cej", type=int, default=None,
                     help="minimum component area for the CEJ mask (px)")
    sub.add_argument("--jobs", type=int, default=1, help="parallel image workers")


def _load_policy_file(path: Path | None) -> dict:
    if path is None:
        return {}
    if not path.exists():
        raise InputError(f"policy file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def _config_from_args(args) -> AnalysisConfig:
    overrides = _load_policy_file(getattr(args, "policy", None))
    mask = MaskprocParams(**overrides.get("maskproc", {}))
    stag = StagingPolicy(**overrides.get("staging", {}))
    diag = DiagnosisPolicy(**overrides.get("diagnosis", {}))
    flag_map = {
        "sigma": "sigma",
        "sigma_cej": "sigma_cej",
        "bin_threshold": "bin_threshold",
        "min_area_bone": "min_area_bone",
        "min_area_cej": "min_area_cej",
    }
    updates = {
        field: getattr(args, attr)
        for attr, field in flag_map.items()
        if getattr(args, attr, None) is not None
    }
    if updates:
        mask = replace(mask, **updates)
    return AnalysisConfig(maskproc=mask, staging=stag, diagnosis=diag)


def _run_case(args, kind: str) -> int:
    config = _config_from_args(args)
    case = load_case(args.manifest)
    if kind == "diagnose" and args.age is not None:
        if not (1 <= args.age <= 130):
            raise InputError("--age must be in [1, 130]")
        case = replace(case, patient_age=args.age)
    analysis = assess_case(case, config, jobs=args.jobs)
    if kind == "analyze":
        report = reports.build_analysis_report(case, analysis, config)
    else:
        report = reports.build_diagnosis_report(case, analysis, config)
    reports.write_report(report, args.out)
    return 1 if analysis.has_unmeasurable_teeth else 0


def _cmd_analyze(args) -> int:
    return _run_case(args, "analyze")


def _cmd_diagnose(args) -> int:
    return _run_case(args, "diagnose")


def _cmd_overlay(args) -> int:
    config = _config_from_args(args)
    case = load_case(args.manifest)
    analysis = assess_case(case, config, jobs=args.jobs)
    sidecar = write_overlays(case, analysis, args.out)
    reports.write_report(sidecar, Path(args.out) / "overlay-warnings.json")
    return 1 if analysis.has_unmeasurable_teeth else 0


def _cmd_eval(args) -> int:
    overrides = _load_policy_file(args.policy)
    policy = StagingPolicy(**overrides.get("staging", {}))
    if args.mode == "seg":
        report = evaluation.eval_seg(args.pred_dir, args.ref_dir)
    elif args.mode == "stage":
        report = evaluation.eval_stage(
            args.pred_dir,
            args.ref_dir,
            policy=policy,
            boundary_tolerance=not args.no_boundary_tolerance,
        )
    else:
        report = evaluation.eval_case(args.pred_dir, args.ref_dir)
    reports.write_report(report, args.out)
    return 0


def _parse_mix(text: str) -> dict[RblStage, float]:
    mix = {}
    for part in text.split(","):
        label, _, value = part.partition("=")
        mix[RblStage.from_label(label.strip())] = float(value)
    return mix


def _cmd_phantom(args) -> int:
    mix = _parse_mix(args.mix) if args.mix else None
    case, truth = phantom.generate_case(
        n_teeth=args.n_teeth,
        stage_mix=mix,
        age=args.age,
        seed=args.seed,
        case_id=args.case_id,
        n_images=args.n_images,
    )
    manifest_path = reports.write_phantom_case(args.out, case, truth)
    print(manifest_path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rblkit",
        description="Measure radiographic bone loss from segmentation masks, "
        "stage each tooth, and diagnose whole cases.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("analyze", help="measure every tooth in a case")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, required=True, help="analysis report path")
    _add_analysis_flags(p)
    p.set_defaults(func=_cmd_analyze)

    p = subs.add_parser("diagnose", help="analyze plus case-level diagnosis")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, required=True, help="diagnosis report path")
    p.add_argument("--age", type=int, default=None,
                   help="patient age override when the manifest lacks one")
    _add_analysis_flags(p)
    p.set_defaults(func=_cmd_diagnose)

    p = subs.add_parser("eval", help="score predictions against references")
    p.add_argument("pred_dir", type=Path)
    p.add_argument("ref_dir", type=Path)
    p.add_argument("--mode", choices=("seg", "stage", "case"), required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--policy", type=Path, default=None)
    p.add_argument("--no-boundary-tolerance", action="store_true",
                   help="disable the +-3%% stage-boundary tolerance")
    p.set_defaults(func=_cmd_eval)

    p = subs.add_parser("phantom", help="generate a synthetic case with ground truth")
    p.add_argument("--out", type=Path, required=True, help="output case directory")
    p.add_argument("--n-teeth", type=int, default=28)
    p.add_argument("--age", type=int, default=45)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mix", type=str, default=None,
                   help='stage mix, e.g. "0=0.6,I=0.2,II=0.1,III=0.1"')
    p.add_argument("--case-id", type=str, default="phantom-case")
    p.add_argument("--n-images", type=int, default=None,
                   help="total images (adds overlapping views beyond full coverage)")
    p.set_defaults(func=_cmd_phantom)

    p = subs.add_parser("overlay", help="render landmark/measurement overlays")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    _add_analysis_flags(p)
    p.set_defaults(func=_cmd_overlay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(_error_record(exc), file=sys.stderr)
        return 2
    except OSError as exc:
        print(_error_record(exc), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
