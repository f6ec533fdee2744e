import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import Point, Polygon as ShapelyPolygon

from conftest import brute_force_polygon_raster, brute_force_polyline_raster
from rblkit.domain import InputError
from rblkit.ingest import (
    load_case,
    rasterize_polygon,
    rasterize_polyline,
    read_binary_mask,
    read_label_mask,
    write_mask_png,
)


class TestRasterizePolygon:
    def test_axis_aligned_square(self):
        pts = np.array([(0, 0), (4, 0), (4, 4), (0, 4)], float)
        mask = rasterize_polygon(pts, 8, 8)
        assert mask.sum() == 16
        assert mask[:4, :4].all()

    def test_zero_area_polygon_empty_with_warning(self):
        pts = np.array([(0, 0), (2, 2), (4, 4)], float)
        with pytest.warns(UserWarning, match="zero-area"):
            mask = rasterize_polygon(pts, 8, 8)
        assert not mask.any()

    def test_full_frame_polygon(self):
        pts = np.array([(0, 0), (6, 0), (6, 5), (0, 5)], float)
        assert rasterize_polygon(pts, 6, 5).all()

    def test_boundary_center_tie_is_inside(self):
        # edge passes exactly through the centers of column 1
        pts = np.array([(1.5, 0), (4, 0), (4, 4), (1.5, 4)], float)
        mask = rasterize_polygon(pts, 6, 4)
        assert mask[:, 1].all()

    def test_matches_brute_force_on_random_polygons(self, rng):
        for _ in range(25):
            n = int(rng.integers(3, 9))
            pts = rng.uniform(0, 12, size=(n, 2))
            got = rasterize_polygon(pts, 12, 12)
            expected = brute_force_polygon_raster(pts, 12, 12)
            assert np.array_equal(got, expected)

    def test_matches_shapely_on_simple_polygons(self, rng):
        # independent geometric oracle on convex (hence simple) polygons
        from scipy.spatial import ConvexHull

        for _ in range(15):
            pts = rng.uniform(0.0, 10.0, size=(8, 2))
            hull = pts[ConvexHull(pts).vertices]
            poly = ShapelyPolygon(hull)
            got = rasterize_polygon(hull, 10, 10)
            for j in range(10):
                for i in range(10):
                    assert got[j, i] == poly.covers(Point(i + 0.5, j + 0.5))

    @given(st.integers(0, 7), st.booleans())
    @settings(max_examples=20)
    def test_invariant_under_rotation_and_reversal(self, shift, reverse):
        pts = np.array([(1.2, 0.7), (7.3, 1.1), (8.2, 6.4), (4.0, 8.9), (0.6, 5.0)])
        variant = np.roll(pts, shift, axis=0)
        if reverse:
            variant = variant[::-1]
        assert np.array_equal(
            rasterize_polygon(pts, 10, 10), rasterize_polygon(variant, 10, 10)
        )

    def test_area_convergence_on_convex_polygons(self, rng):
        # pixel-count area converges to the true area as spacing shrinks;
        # monotone decrease holds for the mean error over random polygons
        from scipy.spatial import ConvexHull

        mean_errors = []
        hulls = []
        for _ in range(12):
            pts = rng.uniform(1.0, 9.0, size=(10, 2))
            hulls.append(pts[ConvexHull(pts).vertices])
        for scale in (1, 4, 16):
            errs = []
            for hull in hulls:
                true_area = ShapelyPolygon(hull).area
                mask = rasterize_polygon(hull * scale, 10 * scale, 10 * scale)
                errs.append(abs(mask.sum() / scale**2 - true_area))
            mean_errors.append(np.mean(errs))
        assert mean_errors[0] > mean_errors[1] > mean_errors[2]

    def test_too_few_vertices(self):
        with pytest.raises(InputError):
            rasterize_polygon(np.array([(0, 0), (1, 1)], float), 4, 4)


class TestRasterizePolyline:
    def test_horizontal_segment(self):
        mask = rasterize_polyline(np.array([(0.5, 2.5), (6.5, 2.5)]), 8, 8)
        assert mask.sum() == 7
        assert mask[2, 0:7].all()

    def test_zero_length_segment(self):
        mask = rasterize_polyline(np.array([(3.5, 3.5), (3.5, 3.5)]), 8, 8)
        assert mask.sum() == 1 and mask[3, 3]

    def test_diagonal_through_corners(self):
        mask = rasterize_polyline(np.array([(0.5, 0.5), (3.5, 3.5)]), 8, 8)
        expected = np.zeros((8, 8), bool)
        for k in range(4):
            expected[k, k] = True
        assert np.array_equal(mask, expected)

    def test_single_vertex_rejected(self):
        with pytest.raises(InputError):
            rasterize_polyline(np.array([(1.0, 1.0)]), 4, 4)

    def test_matches_brute_force_random_segments(self, rng):
        for _ in range(30):
            pts = rng.uniform(-2, 12, size=(int(rng.integers(2, 5)), 2))
            got = rasterize_polyline(pts, 10, 10)
            expected = brute_force_polyline_raster(pts, 10, 10)
            assert np.array_equal(got, expected)

    def test_result_is_connected_chain(self, rng):
        from scipy import ndimage

        for _ in range(10):
            pts = rng.uniform(1, 9, size=(2, 2))
            mask = rasterize_polyline(pts, 10, 10)
            structure = np.ones((3, 3), bool)
            assert ndimage.label(mask, structure=structure)[1] == 1


class TestPngIO:
    def test_binary_round_trip(self, tmp_path, rng):
        mask = rng.random((20, 30)) > 0.5
        path = tmp_path / "m.png"
        write_mask_png(mask, path)
        assert np.array_equal(read_binary_mask(path), mask)

    def test_label_round_trip(self, tmp_path):
        labels = np.zeros((10, 10), np.int32)
        labels[2:5, 2:5] = 3
        labels[6:9, 6:9] = 254
        path = tmp_path / "t.png"
        write_mask_png(labels, path)
        assert np.array_equal(read_label_mask(path), labels)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError, match="not found"):
            read_binary_mask(tmp_path / "absent.png")

    def test_label_out_of_range(self, tmp_path):
        with pytest.raises(InputError):
            write_mask_png(np.full((4, 4), 300, np.int32), tmp_path / "bad.png")


def write_minimal_case(tmp_path, age=45, spacing=(0.1, 0.1), n_images=2):
    (tmp_path / "masks").mkdir(exist_ok=True)
    images = []
    for k in range(n_images):
        image_id = f"img-{k}"
        bone = np.zeros((40, 40), bool)
        bone[25:, :] = True
        tooth = np.zeros((40, 40), np.int32)
        tooth[5:35, 15 + k : 25 + k] = 1
        cej = np.zeros((40, 40), bool)
        cej[12, 10:30] = True
        for name, arr in (("bone", bone), ("tooth", tooth), ("cej", cej)):
            write_mask_png(arr, tmp_path / "masks" / f"{image_id}_{name}.png")
        images.append(
            {
                "image_id": image_id,
                "spacing_mm_per_px": list(spacing) if spacing else None,
                "tooth_table": {"1": 36 + k},
                "numbering": "fdi",
                "arch": "mandible",
                "bone_mask": f"masks/{image_id}_bone.png",
                "tooth_mask": f"masks/{image_id}_tooth.png",
                "cej_mask": f"masks/{image_id}_cej.png",
            }
        )
    manifest = {"case_id": "case-xyz", "patient_age": age, "images": images}
    path = tmp_path / "case.json"
    path.write_text(json.dumps(manifest))
    return path


class TestLoadCase:
    def test_happy_path(self, tmp_path):
        case = load_case(write_minimal_case(tmp_path))
        assert case.case_id == "case-xyz"
        assert len(case.records) == 2
        assert [r.image_id for r in case.records] == ["img-0", "img-1"]

    def test_missing_mask_file_names_path(self, tmp_path):
        path = write_minimal_case(tmp_path)
        (tmp_path / "masks" / "img-1_cej.png").unlink()
        with pytest.raises(InputError, match="img-1_cej.png"):
            load_case(path)

    def test_age_zero_rejected(self, tmp_path):
        path = write_minimal_case(tmp_path, age=0)
        with pytest.raises(InputError, match="patient_age"):
            load_case(path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(InputError, match="not found"):
            load_case(tmp_path / "nope.json")

    def test_schema_violation_names_field(self, tmp_path):
        path = write_minimal_case(tmp_path)
        data = json.loads(path.read_text())
        data["images"][1]["spacing_mm_per_px"] = [0.1]
        path.write_text(json.dumps(data))
        with pytest.raises(InputError, match=r"images\[1\].spacing_mm_per_px"):
            load_case(path)

    def test_deterministic_representation(self, tmp_path):
        path = write_minimal_case(tmp_path)
        a = load_case(path)
        b = load_case(path)
        assert a.case_id == b.case_id and a.patient_age == b.patient_age
        for ra, rb in zip(a.records, b.records):
            assert ra.image_id == rb.image_id
            assert np.array_equal(ra.bone_mask, rb.bone_mask)
            assert np.array_equal(ra.tooth_mask, rb.tooth_mask)
            assert np.array_equal(ra.cej_mask, rb.cej_mask)
            assert ra.tooth_table == rb.tooth_table

    def test_image_order_independent_of_manifest_order(self, tmp_path):
        path = write_minimal_case(tmp_path)
        data = json.loads(path.read_text())
        data["images"].reverse()
        path.write_text(json.dumps(data))
        case = load_case(path)
        assert [r.image_id for r in case.records] == ["img-0", "img-1"]

    def test_annotation_source(self, tmp_path):
        ann = {
            "image_id": "a1",
            "polygons": [
                {"roi": "bone_area", "points": [[0, 20], [40, 20], [40, 40], [0, 40]]},
                {"roi": "tooth", "label": 2, "points": [[10, 2], [20, 2], [20, 30], [10, 30]]},
                {"roi": "other", "points": [[1, 1], [3, 1], [3, 3]]},
            ],
            "polylines": [
                {"roi": "cej", "points": [[5, 10], [30, 10]], "crown_margin": True}
            ],
        }
        (tmp_path / "a1.json").write_text(json.dumps(ann))
        manifest = {
            "case_id": "ann-case",
            "patient_age": 30,
            "images": [
                {
                    "image_id": "a1",
                    "annotations": "a1.json",
                    "width": 40,
                    "height": 40,
                    "tooth_table": {"2": 11},
                    "spacing_mm_per_px": [0.1, 0.1],
                }
            ],
        }
        (tmp_path / "case.json").write_text(json.dumps(manifest))
        case = load_case(tmp_path / "case.json")
        rec = case.records[0]
        assert rec.crown_margin_as_cej
        assert (rec.tooth_mask == 2).sum() == 280
        assert rec.bone_mask.sum() == 800
        assert rec.cej_mask.sum() == 25

    def test_out_of_bounds_vertices_clamped_with_warning(self, tmp_path):
        ann = {
            "image_id": "a1",
            "polygons": [
                {"roi": "tooth", "label": 1, "points": [[-5, -5], [50, -5], [50, 50], [-5, 50]]}
            ],
            "polylines": [],
        }
        (tmp_path / "a1.json").write_text(json.dumps(ann))
        manifest = {
            "case_id": "clamp-case",
            "images": [
                {
                    "image_id": "a1",
                    "annotations": "a1.json",
                    "width": 20,
                    "height": 20,
                    "tooth_table": {"1": 11},
                }
            ],
        }
        (tmp_path / "case.json").write_text(json.dumps(manifest))
        with pytest.warns(UserWarning, match="clamped"):
            case = load_case(tmp_path / "case.json")
        assert (case.records[0].tooth_mask == 1).all()
