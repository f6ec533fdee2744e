"""Bone-loss staging rules.

Thresholds follow the 2018 periodontitis classification exactly as
typeset: stage I strictly below 15%, stage II inclusive 15..33%, stage III
strictly above 33%. A CEJ-to-crest distance under 1.5 mm overrides the
percentage entirely (no bone loss). The +-3% band marks percentages close
enough to a threshold that either adjacent stage is defensible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .domain import InputError, RblStage

__all__ = ["StagingPolicy", "stage_site", "stage_tooth", "boundary_flag", "stages_compatible"]


@dataclass(frozen=True)
class StagingPolicy:
    stage1_max_percent: float = 15.0
    stage2_max_percent: float = 33.0
    no_loss_max_mm: float = 1.5
    boundary_band_percent: float = 3.0

    def __post_init__(self):
        if not (0.0 < self.stage1_max_percent < self.stage2_max_percent < 100.0):
            raise InputError("need 0 < stage1_max < stage2_max < 100")
        if self.no_loss_max_mm <= 0:
            raise InputError("no_loss_max_mm must be > 0")
        if self.boundary_band_percent < 0:
            raise InputError("boundary_band_percent must be >= 0")


DEFAULT_POLICY = StagingPolicy()


def stage_site(
    rbl_percent: float,
    cej_bone_mm: Optional[float],
    policy: StagingPolicy = DEFAULT_POLICY,
) -> RblStage:
    """Stage one site from its RBL% and (when known) CEJ-crest distance in mm.

    cej_bone_mm=None (no pixel spacing) skips the 1.5 mm no-bone-loss rule;
    callers record the mm-rule-skipped flag in that case.
    """
    if not (0.0 <= rbl_percent <= 100.0):
        raise InputError(f"rbl_percent out of [0, 100]: {rbl_percent}")
    if cej_bone_mm is not None and cej_bone_mm < policy.no_loss_max_mm:
        return RblStage.NO_BONE_LOSS
    if rbl_percent < policy.stage1_max_percent:
        return RblStage.I
    if rbl_percent <= policy.stage2_max_percent:
        return RblStage.II
    return RblStage.III


def stage_tooth(mesial: Optional[RblStage], distal: Optional[RblStage]) -> Optional[RblStage]:
    """Per-tooth stage: the higher of the staged sites; None when both missing."""
    staged = [s for s in (mesial, distal) if s is not None]
    if not staged:
        return None
    return max(staged)


def boundary_flag(rbl_percent: float, policy: StagingPolicy = DEFAULT_POLICY) -> bool:
    """True when rbl_percent is within the band of either stage threshold."""
    if not (0.0 <= rbl_percent <= 100.0):
        raise InputError(f"rbl_percent out of [0, 100]: {rbl_percent}")
    band = policy.boundary_band_percent
    return (
        abs(rbl_percent - policy.stage1_max_percent) <= band
        or abs(rbl_percent - policy.stage2_max_percent) <= band
    )


def stages_compatible(
    predicted: RblStage,
    predicted_rbl: Optional[float],
    reference: RblStage,
    policy: StagingPolicy = DEFAULT_POLICY,
    tolerance: bool = True,
) -> bool:
    """Agreement test used by the evaluation harness.

    With tolerance on, a prediction whose RBL% sits within the band of a
    threshold also matches the stage on the other side of that threshold.
    The no-bone-loss stage is governed by the millimeter rule, so the
    percentage band never bridges to or from it.
    """
    if predicted == reference:
        return True
    if not tolerance or predicted_rbl is None:
        return False
    band = policy.boundary_band_percent
    near1 = abs(predicted_rbl - policy.stage1_max_percent) <= band
    near2 = abs(predicted_rbl - policy.stage2_max_percent) <= band
    pair = {predicted, reference}
    if near1 and pair == {RblStage.I, RblStage.II}:
        return True
    if near2 and pair == {RblStage.II, RblStage.III}:
        return True
    return False
