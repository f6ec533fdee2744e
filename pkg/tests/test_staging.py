import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rblkit.domain import InputError, RblStage
from rblkit.staging import (
    StagingPolicy,
    boundary_flag,
    stage_site,
    stage_tooth,
    stages_compatible,
)

S = RblStage


class TestStageSite:
    # representative stage-I and stage-III sites (mean CAD values per stage)
    def test_stage1_representative(self):
        assert stage_site(12.11, 1.73) == S.I

    def test_stage3_representative(self):
        assert stage_site(36.12, 4.71) == S.III

    def test_mm_rule_overrides_percentage(self):
        assert stage_site(20.0, 1.2) == S.NO_BONE_LOSS

    def test_threshold_conventions(self):
        assert stage_site(15.0, 3.0) == S.II
        assert stage_site(33.0, 5.0) == S.II
        assert stage_site(33.01, 5.0) == S.III
        assert stage_site(14.99, 3.0) == S.I

    def test_mm_missing_uses_percentage_only(self):
        assert stage_site(20.0, None) == S.II
        assert stage_site(1.0, None) == S.I

    def test_mm_rule_boundary_strict(self):
        assert stage_site(40.0, 1.49) == S.NO_BONE_LOSS
        assert stage_site(40.0, 1.50) == S.III

    def test_out_of_range_percent_rejected(self):
        with pytest.raises(InputError):
            stage_site(-0.1, 2.0)
        with pytest.raises(InputError):
            stage_site(100.1, 2.0)

    def test_no_bone_loss_iff_mm_below_rule_grid(self):
        # full 0.01-step sweeps along both critical axes
        policy = StagingPolicy()
        for mm100 in range(0, 1001):  # mm in 0..10 step 0.01
            mm = mm100 / 100.0
            for rbl in (0.0, 14.99, 15.0, 33.0, 33.01, 100.0):
                got = stage_site(rbl, mm, policy)
                assert (got == S.NO_BONE_LOSS) == (mm < 1.5)
        for rbl100 in range(0, 10001):  # rbl in 0..100 step 0.01
            rbl = rbl100 / 100.0
            assert stage_site(rbl, 1.49, policy) == S.NO_BONE_LOSS
            assert stage_site(rbl, 1.50, policy) != S.NO_BONE_LOSS

    def test_coarse_grid_cross_product(self):
        for rbl in np.arange(0.0, 100.01, 0.5):
            for mm in np.arange(0.0, 10.01, 0.25):
                got = stage_site(float(round(rbl, 2)), float(round(mm, 2)))
                if mm < 1.5:
                    assert got == S.NO_BONE_LOSS
                elif rbl < 15:
                    assert got == S.I
                elif rbl <= 33:
                    assert got == S.II
                else:
                    assert got == S.III

    @given(
        rbl=st.lists(st.floats(0, 100), min_size=2, max_size=2).map(sorted),
        mm=st.floats(1.5, 10),
    )
    def test_monotone_when_mm_rule_inactive(self, rbl, mm):
        lo, hi = rbl
        assert stage_site(lo, mm) <= stage_site(hi, mm)


class TestStageTooth:
    def test_max_rule(self):
        assert stage_tooth(S.I, S.III) == S.III

    def test_idempotent(self):
        assert stage_tooth(S.II, S.II) == S.II

    def test_single_site(self):
        assert stage_tooth(S.NO_BONE_LOSS, None) == S.NO_BONE_LOSS

    def test_both_missing(self):
        assert stage_tooth(None, None) is None

    @given(
        a=st.sampled_from(list(S)) | st.none(),
        b=st.sampled_from(list(S)) | st.none(),
    )
    def test_commutative(self, a, b):
        assert stage_tooth(a, b) == stage_tooth(b, a)


class TestBoundaryFlag:
    def test_within_band_of_15(self):
        assert boundary_flag(14.0)

    def test_outside_both_bands(self):
        assert not boundary_flag(24.0)

    def test_band_edge_inclusive(self):
        assert boundary_flag(36.0)
        assert boundary_flag(12.0)
        assert not boundary_flag(11.99)


class TestStagesCompatible:
    def test_exact_match(self):
        assert stages_compatible(S.II, 20.0, S.II)

    def test_band_bridges_adjacent_stage(self):
        assert stages_compatible(S.I, 14.0, S.II)
        assert stages_compatible(S.III, 34.5, S.II)

    def test_band_does_not_bridge_two_stages(self):
        assert not stages_compatible(S.I, 14.0, S.III)

    def test_no_bridge_to_no_bone_loss(self):
        assert not stages_compatible(S.I, 14.0, S.NO_BONE_LOSS)

    def test_tolerance_off(self):
        assert not stages_compatible(S.I, 14.0, S.II, tolerance=False)

    def test_away_from_band_no_bridge(self):
        assert not stages_compatible(S.I, 10.0, S.II)


class TestPolicy:
    def test_invalid_policy(self):
        with pytest.raises(InputError):
            StagingPolicy(stage1_max_percent=40, stage2_max_percent=30)
        with pytest.raises(InputError):
            StagingPolicy(no_loss_max_mm=0)

    def test_policy_sweep_changes_result(self):
        loose = StagingPolicy(stage1_max_percent=25)
        assert stage_site(20.0, 3.0, loose) == S.I
