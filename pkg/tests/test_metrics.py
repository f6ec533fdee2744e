import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_force_auroc, numeric_t_two_sided_p
from rblkit.domain import InputError, RblStage, SiteMeasurement, ToothAssessment
from rblkit.metrics import (
    ConfusionMatrix,
    auroc,
    cohens_kappa,
    dice,
    jaccard,
    pixel_accuracy,
    rates,
    roc_curve,
    stage_scores_for_auroc,
    two_sample_t_test,
)

masks = st.integers(1, 12).flatmap(
    lambda n: st.tuples(
        st.lists(st.booleans(), min_size=n * n, max_size=n * n),
        st.lists(st.booleans(), min_size=n * n, max_size=n * n),
    ).map(lambda ab: (np.array(ab[0]).reshape(n, n), np.array(ab[1]).reshape(n, n)))
)


class TestOverlapScores:
    def test_identical_masks(self):
        m = np.zeros((4, 4), bool)
        m[1:3, 1:3] = True
        assert dice(m, m) == 1.0
        assert jaccard(m, m) == 1.0
        assert pixel_accuracy(m, m) == 1.0

    def test_disjoint(self):
        a = np.zeros((4, 4), bool)
        b = np.zeros((4, 4), bool)
        a[0, 0] = True
        b[3, 3] = True
        assert dice(a, b) == 0.0
        assert jaccard(a, b) == 0.0

    def test_half_overlap(self):
        a = np.zeros((4, 4), bool)
        b = np.zeros((4, 4), bool)
        a[0, 0:4] = True
        b[0, 2:4] = True
        b[1, 0:2] = True
        # |a|=4, |b|=4, overlap 2
        assert dice(a, b) == 0.5
        assert jaccard(a, b) == pytest.approx(1 / 3)

    def test_pixel_accuracy_counts(self):
        ref = np.zeros((4, 4), bool)
        pred = ref.copy()
        pred[0, 0] = pred[1, 1] = pred[2, 2] = True
        assert pixel_accuracy(pred, ref) == pytest.approx(13 / 16)

    def test_complement_accuracy_zero(self):
        ref = np.zeros((3, 3), bool)
        assert pixel_accuracy(~ref, ref) == 0.0

    def test_both_empty_convention(self):
        e = np.zeros((3, 3), bool)
        assert dice(e, e) == 1.0
        assert jaccard(e, e) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            dice(np.zeros((2, 2), bool), np.zeros((3, 3), bool))

    @given(masks)
    def test_symmetry_and_identity(self, pair):
        a, b = pair
        assert dice(a, b) == dice(b, a)
        assert jaccard(a, b) == jaccard(b, a)
        j = jaccard(a, b)
        assert dice(a, b) == pytest.approx(2 * j / (1 + j), abs=1e-12)
        assert 0.0 <= dice(a, b) <= 1.0
        assert 0.0 <= pixel_accuracy(a, b) <= 1.0


class TestRates:
    def test_diagonal_only(self):
        cm = ConfusionMatrix(np.diag([5, 7, 9]), classes=("a", "b", "c"))
        r = rates(cm, "b")
        assert (r.sensitivity, r.specificity, r.accuracy) == (1.0, 1.0, 1.0)

    def test_two_by_two(self):
        cm = ConfusionMatrix(np.array([[8, 2], [1, 9]]), classes=(True, False))
        r = rates(cm, True)
        assert r.sensitivity == pytest.approx(0.8)
        assert r.specificity == pytest.approx(0.9)
        assert r.accuracy == pytest.approx(0.85)

    def test_absent_positive_class(self):
        cm = ConfusionMatrix(np.array([[0, 0], [3, 5]]), classes=("pos", "neg"))
        r = rates(cm, "pos")
        assert r.sensitivity is None
        assert "sensitivity-undefined" in r.flags

    def test_accuracy_recomputed_from_counts(self, rng):
        for _ in range(25):
            counts = rng.integers(0, 30, size=(4, 4))
            if counts.sum() == 0:
                continue
            cm = ConfusionMatrix(counts, classes=("0", "I", "II", "III"))
            for k, cls in enumerate(cm.classes):
                r = rates(cm, cls)
                tp = counts[k, k]
                tn = counts.sum() - counts[k, :].sum() - counts[:, k].sum() + tp
                assert r.accuracy == pytest.approx((tp + tn) / counts.sum(), abs=1e-12)

    def test_empty_matrix_rejected(self):
        with pytest.raises(InputError):
            rates(ConfusionMatrix(np.zeros((2, 2), int), classes=("a", "b")), "a")


class TestKappa:
    def test_perfect_agreement(self):
        cm = ConfusionMatrix(np.diag([10, 20, 30]), classes=(0, 1, 2))
        assert cohens_kappa(cm) == 1.0

    def test_independent_margins(self):
        cm = ConfusionMatrix(np.full((2, 2), 25), classes=(0, 1))
        assert cohens_kappa(cm) == 0.0

    def test_hand_computed_fixture(self):
        # p_o = 35/50 = 0.7; margins 25/25 and 30/20 -> p_e = 0.5; kappa = 0.4
        cm = ConfusionMatrix(np.array([[20, 5], [10, 15]]), classes=(0, 1))
        assert cohens_kappa(cm) == pytest.approx(0.4, abs=1e-15)

    def test_degenerate_margins(self):
        cm = ConfusionMatrix(np.array([[5, 0], [0, 0]]), classes=(0, 1))
        assert cohens_kappa(cm) == 1.0
        cm = ConfusionMatrix(np.array([[0, 5], [0, 0]]), classes=(0, 1))
        assert cohens_kappa(cm) == 0.0

    def test_bounds(self, rng):
        for _ in range(50):
            counts = rng.integers(0, 20, size=(3, 3))
            if counts.sum() == 0:
                continue
            k = cohens_kappa(ConfusionMatrix(counts, classes=(0, 1, 2)))
            assert -1.0 - 1e-12 <= k <= 1.0 + 1e-12


class TestAuroc:
    def test_perfectly_separated(self):
        assert auroc([1, 2, 3, 10, 11], [False, False, False, True, True]) == 1.0

    def test_all_ties(self):
        assert auroc([5, 5, 5, 5], [True, False, True, False]) == 0.5

    def test_pair_counting_example(self):
        scores = [0.1, 0.4, 0.35, 0.8]
        labels = [False, True, False, True]
        assert auroc(scores, labels) == 1.0

    def test_reversed_scores(self):
        scores = [-s for s in (0.1, 0.4, 0.35, 0.8)]
        assert auroc(scores, [False, True, False, True]) == 0.0

    def test_single_class_rejected(self):
        with pytest.raises(InputError):
            auroc([1, 2], [True, True])

    def test_matches_brute_force(self, rng):
        for _ in range(40):
            n = int(rng.integers(4, 60))
            scores = rng.choice([0.1, 0.2, 0.3, 0.5, 0.9], size=n)  # force ties
            labels = rng.random(n) < 0.5
            if labels.all() or not labels.any():
                continue
            assert auroc(scores, labels) == pytest.approx(
                brute_force_auroc(scores, labels), abs=1e-12
            )

    def test_rank_method_matches_pair_counting(self, rng):
        import rblkit.metrics as m

        scores = rng.normal(size=500).round(1)  # plenty of ties
        labels = rng.random(500) < 0.4
        pos, neg = scores[labels], scores[~labels]
        assert m._auroc_ranks(pos, neg) == pytest.approx(
            m._auroc_pair_count(pos, neg), abs=1e-12
        )

    @given(
        data=st.lists(
            st.tuples(st.floats(-100, 100), st.booleans()), min_size=4, max_size=40
        ).filter(lambda d: any(x[1] for x in d) and any(not x[1] for x in d)),
        shift=st.floats(0.1, 10),
    )
    @settings(max_examples=60)
    def test_invariant_under_increasing_transform(self, data, shift):
        scores = [x[0] for x in data]
        labels = [x[1] for x in data]
        transformed = [math.atan(s / 50) * shift + s**3 / 1e4 for s in scores]
        assert auroc(transformed, labels) == pytest.approx(auroc(scores, labels), abs=1e-12)

    def test_roc_curve_endpoints_monotone(self, rng):
        scores = rng.normal(size=50)
        labels = rng.random(50) < 0.5
        if labels.all() or not labels.any():
            labels[0] = True
            labels[1] = False
        pts = roc_curve(scores, labels)
        assert pts[0] == (0.0, 0.0)
        assert pts[-1] == (1.0, 1.0)
        fprs = [p[0] for p in pts]
        tprs = [p[1] for p in pts]
        assert fprs == sorted(fprs)
        assert tprs == sorted(tprs)


def _tooth(fdi, rbl, stage, mm=None):
    site = SiteMeasurement(
        side="mesial", rbl_percent=rbl, len1_mm=mm,
        reliable=mm is not None, reasons=() if mm is not None else ("no-spacing",),
    )
    return ToothAssessment(
        tooth_fdi=fdi, mesial=site, tooth_rbl_percent=rbl, stage=stage
    )


class TestStageScores:
    def test_loss_stage_target_uses_rbl(self):
        teeth = [_tooth(11, 10.0, RblStage.I, 1.8), _tooth(12, 40.0, RblStage.III, 6.0)]
        scores, labels = stage_scores_for_auroc(teeth, RblStage.III)
        assert scores == [10.0, 40.0]
        assert labels == [False, True]
        assert auroc(scores, labels) == 1.0

    def test_no_bone_loss_target_uses_negative_mm(self):
        teeth = [_tooth(11, 5.0, RblStage.NO_BONE_LOSS, 1.0), _tooth(12, 20.0, RblStage.II, 3.0)]
        scores, labels = stage_scores_for_auroc(teeth, RblStage.NO_BONE_LOSS)
        assert scores == [-1.0, -3.0]
        assert labels == [True, False]
        assert auroc(scores, labels) == 1.0

    def test_single_class_fails_downstream(self):
        teeth = [_tooth(11, 40.0, RblStage.III, 6.0), _tooth(12, 50.0, RblStage.III, 7.0)]
        scores, labels = stage_scores_for_auroc(teeth, RblStage.III)
        with pytest.raises(InputError):
            auroc(scores, labels)


class TestTTest:
    def test_identical_paired(self):
        t, p = two_sample_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], paired=True)
        assert (t, p) == (0.0, 1.0)

    def test_identical_unpaired(self):
        t, p = two_sample_t_test([1, 2, 3], [1, 2, 3])
        assert (t, p) == (0.0, 1.0)

    def test_known_unpaired_value(self):
        t, p = two_sample_t_test([1, 2, 3, 4], [11, 12, 13, 14])
        expected_t = -10.0 / math.sqrt((5 / 3) * (1 / 4 + 1 / 4))
        assert t == pytest.approx(expected_t, abs=1e-12)
        assert p == pytest.approx(numeric_t_two_sided_p(t, 6), abs=1e-6)

    def test_against_numeric_integration(self, rng):
        for _ in range(20):
            xs = rng.normal(0, 1, size=int(rng.integers(3, 12)))
            ys = rng.normal(0.5, 1.2, size=int(rng.integers(3, 12)))
            t, p = two_sample_t_test(xs, ys)
            df = len(xs) + len(ys) - 2
            assert p == pytest.approx(numeric_t_two_sided_p(t, df), abs=1e-6)

    def test_paired_matches_numeric(self, rng):
        xs = rng.normal(0, 1, size=10)
        ys = xs + rng.normal(0.3, 0.2, size=10)
        t, p = two_sample_t_test(xs, ys, paired=True)
        assert p == pytest.approx(numeric_t_two_sided_p(t, 9), abs=1e-6)

    def test_swap_negates_t_preserves_p(self, rng):
        xs = list(rng.normal(size=6))
        ys = list(rng.normal(1, 1, size=8))
        t1, p1 = two_sample_t_test(xs, ys)
        t2, p2 = two_sample_t_test(ys, xs)
        assert t1 == pytest.approx(-t2)
        assert p1 == pytest.approx(p2)

    def test_zero_variance_unequal_means(self):
        t, p = two_sample_t_test([1, 1, 1], [2, 2, 2])
        assert math.isinf(t) and p == 0.0

    def test_short_samples_rejected(self):
        with pytest.raises(InputError):
            two_sample_t_test([1], [1, 2])

    def test_paired_length_mismatch(self):
        with pytest.raises(InputError):
            two_sample_t_test([1, 2], [1, 2, 3], paired=True)
