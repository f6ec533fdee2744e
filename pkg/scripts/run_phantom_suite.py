#!/usr/bin/env python3
"""Measure the engine against a randomized phantom suite and print error stats.

Example:
    python scripts/run_phantom_suite.py --n 500 --seed 500500 --degrade 0.0
"""

import argparse
import time

import numpy as np

from rblkit import phantom, pipeline
from rblkit.domain import PixelSpacing, RblStage


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=500, help="number of phantom images")
    ap.add_argument("--seed", type=int, default=500500)
    ap.add_argument("--degrade", type=float, default=0.0, help="noise density in [0, 0.05]")
    ap.add_argument("--max-angle", type=float, default=30.0)
    args = ap.parse_args()

    cfg = pipeline.AnalysisConfig()
    rng = np.random.default_rng(args.seed)
    errors = []
    stage_hits = 0
    stage_total = 0
    unmeasurable = 0
    t0 = time.monotonic()
    for k in range(args.n):
        stage = RblStage(int(rng.integers(0, 4)))
        arch = "maxilla" if rng.random() < 0.5 else "mandible"
        fdi = int(rng.choice([11, 13, 14, 16, 21, 24, 26, 33, 36, 41, 44, 46, 47]))
        angle = float(np.clip(rng.uniform(-23, 23) + rng.uniform(-7, 7),
                              -args.max_angle, args.max_angle))
        spec = phantom.random_tooth_spec(fdi, stage, rng, angle_deg=angle)
        iso = rng.uniform(0.08, 0.12)
        record, truth = phantom.generate_image(
            [spec], PixelSpacing(iso, iso), seed=k, image_id=f"suite-{k:04d}", arch=arch
        )
        if args.degrade > 0:
            record = phantom.degrade(record, args.degrade, seed=10 * k + 1)
        assessment = pipeline.assess_image(record, cfg).assessments[0]
        tooth_truth = truth.teeth[0]
        stage_total += 1
        stage_hits += assessment.stage == tooth_truth.stage
        for site in assessment.sites:
            if site.rbl_percent is None:
                unmeasurable += 1
                continue
            errors.append(site.rbl_percent - tooth_truth.site(site.side).rbl_percent)
    elapsed = time.monotonic() - t0

    errors = np.asarray(errors)
    print(f"images          {args.n}")
    print(f"sites measured  {len(errors)} (unmeasurable {unmeasurable})")
    print(f"mean error      {errors.mean():+.3f} pp")
    print(f"p95 |error|     {np.percentile(np.abs(errors), 95):.3f} pp")
    print(f"max |error|     {np.abs(errors).max():.3f} pp")
    print(f"within 2 pp     {100 * np.mean(np.abs(errors) <= 2):.2f} %")
    print(f"stage exact     {100 * stage_hits / stage_total:.2f} %")
    print(f"elapsed         {elapsed:.1f} s")


if __name__ == "__main__":
    main()
