#!/usr/bin/env python3
"""Sensitivity sweep: how stage agreement moves as the thresholds shift.

Re-stages a phantom cohort under perturbed stage-I/II cutoffs and prints
kappa against the default-policy truth, one row per candidate policy.

Example:
    python scripts/sweep_staging_policy.py --n 200
"""

import argparse

import numpy as np

from rblkit import phantom, pipeline
from rblkit.domain import PixelSpacing, RblStage
from rblkit.metrics import ConfusionMatrix, cohens_kappa
from rblkit.staging import StagingPolicy, stage_site, stage_tooth


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--seed", type=int, default=13)
    args = ap.parse_args()

    cfg = pipeline.AnalysisConfig()
    rng = np.random.default_rng(args.seed)
    measured = []  # (site rbl/mm pairs per tooth, truth stage)
    for k in range(args.n):
        stage = RblStage(int(rng.integers(0, 4)))
        fdi = int(rng.choice([11, 14, 16, 33, 36, 46]))
        spec = phantom.random_tooth_spec(fdi, stage, rng)
        iso = rng.uniform(0.08, 0.12)
        record, truth = phantom.generate_image(
            [spec], PixelSpacing(iso, iso), seed=k, image_id=f"sweep-{k:04d}"
        )
        assessment = pipeline.assess_image(record, cfg).assessments[0]
        sites = [
            (s.rbl_percent, s.len1_mm)
            for s in assessment.sites
            if s.rbl_percent is not None
        ]
        if sites:
            measured.append((sites, truth.teeth[0].stage))

    print(f"{'stage1max':>9} {'stage2max':>9} {'kappa':>7}")
    for s1 in (12.0, 14.0, 15.0, 16.0, 18.0):
        for s2 in (30.0, 33.0, 36.0):
            policy = StagingPolicy(stage1_max_percent=s1, stage2_max_percent=s2)
            ref, pred = [], []
            for sites, truth_stage in measured:
                stages = [stage_site(rbl, mm, policy) for rbl, mm in sites]
                tooth_stage = stage_tooth(
                    stages[0], stages[1] if len(stages) > 1 else None
                )
                ref.append(truth_stage.label)
                pred.append(tooth_stage.label)
            cm = ConfusionMatrix.from_pairs(ref, pred, ("0", "I", "II", "III"))
            print(f"{s1:>9.1f} {s2:>9.1f} {cohens_kappa(cm):>7.4f}")


if __name__ == "__main__":
    main()
