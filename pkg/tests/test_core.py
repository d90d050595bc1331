import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wirelift.core import (
    CameraModel,
    JunctionType,
    VanishingPoints,
    Vertex,
    Wireframe,
    calibrated_ray,
    dumps_wireframe,
    loads_wireframe,
    normalize_vp,
    project,
    validate,
    wireframe_from_json,
    wireframe_to_json,
)


def make_wf(vertices, edges, size=(64, 64)):
    return Wireframe(vertices, edges, size)


class TestValidate:
    def test_single_c_vertex_no_edges_is_clean(self):
        wf = make_wf([Vertex((3.0, 4.0), JunctionType.C)], [])
        assert validate(wf) == []

    def test_t_vertex_with_degree_two(self):
        vs = [
            Vertex((1.0, 1.0), JunctionType.T),
            Vertex((5.0, 1.0), JunctionType.C),
            Vertex((1.0, 5.0), JunctionType.C),
        ]
        wf = make_wf(vs, [(0, 1), (0, 2)])
        violations = validate(wf)
        assert len(violations) == 1
        assert violations[0].rule == "T-degree"
        assert violations[0].indices == (0,)

    def test_self_loop(self):
        vs = [Vertex((1.0, 1.0), JunctionType.C) for _ in range(4)]
        wf = make_wf(vs, [(3, 3)])
        violations = validate(wf)
        assert [v.rule for v in violations] == ["self-loop"]
        assert violations[0].indices == (3, 3)

    def test_duplicate_edge_detected_in_either_orientation(self):
        vs = [Vertex((1.0, 1.0), JunctionType.C), Vertex((2.0, 2.0), JunctionType.C)]
        wf = make_wf(vs, [(0, 1), (1, 0)])
        assert [v.rule for v in validate(wf)] == ["duplicate-edge"]

    def test_out_of_range_edge_and_position(self):
        vs = [Vertex((70.0, 1.0), JunctionType.C)]
        wf = make_wf(vs, [(0, 5)])
        rules = {v.rule for v in validate(wf)}
        assert rules == {"position-bounds", "edge-index"}

    def test_nonpositive_depth(self):
        wf = make_wf([Vertex((1.0, 1.0), JunctionType.C, depth=0.0)], [])
        assert [v.rule for v in validate(wf)] == ["depth-positive"]


class TestNormalizeVp:
    def test_origin(self):
        assert np.allclose(normalize_vp((0.0, 0.0)), [0.0, 0.0, 1.0])

    def test_unit_x(self):
        assert np.allclose(normalize_vp((1.0, 0.0)), [0.5, 0.0, 0.5])

    def test_three_four(self):
        # hand evaluation: 3^2 + 4^2 + 1 = 26
        assert np.allclose(normalize_vp((3.0, 4.0)), [3 / 26, 4 / 26, 1 / 26], atol=1e-15)

    @given(
        st.floats(-1e6, 1e6, allow_nan=False),
        st.floats(-1e6, 1e6, allow_nan=False),
    )
    @settings(max_examples=1000, deadline=None)
    def test_algebraic_identity(self, x, y):
        # v * (x^2 + y^2 + 1) == [x, y, 1] and third component recovers the input
        v = normalize_vp((x, y))
        s = x * x + y * y + 1.0
        assert abs(v[0] * s - x) <= 1e-12 * max(1.0, abs(x))
        assert abs(v[1] * s - y) <= 1e-12 * max(1.0, abs(y))
        assert abs(v[2] * s - 1.0) <= 1e-12
        assert v[2] > 0
        assert np.linalg.norm(v) <= 1.0 + 1e-12

    def test_idempotent_under_reprojection(self):
        v = normalize_vp((17.0, -3.5))
        again = normalize_vp((v[0] / v[2], v[1] / v[2]))
        assert np.allclose(v, again, atol=1e-15)


class TestCalibratedRay:
    def test_principal_point_is_optical_axis(self):
        cam = CameraModel(320.0, (100.0, 80.0), (512, 512))
        assert np.allclose(calibrated_ray(cam, (100.0, 80.0)), [0.0, 0.0, 1.0])

    def test_45_degree_ray(self):
        cam = CameraModel(100.0, (0.0, 0.0), (512, 512))
        assert np.allclose(calibrated_ray(cam, (100.0, 0.0)), [1.0, 0.0, 1.0])

    def test_matrix_inverse_example(self):
        cam = CameraModel(256.0, (256.0, 256.0), (512, 512))
        assert np.allclose(calibrated_ray(cam, (0.0, 512.0)), [-1.0, 1.0, 1.0])

    def test_ray_matches_explicit_K_inverse(self):
        cam = CameraModel(417.0, (250.0, 261.5), (512, 512))
        p = (312.25, 41.0)
        expected = cam.K_inv() @ np.array([p[0], p[1], 1.0])
        assert np.allclose(calibrated_ray(cam, p), expected, atol=1e-12)
        assert calibrated_ray(cam, p)[2] == 1.0

    @given(
        st.floats(-5.0, 5.0),
        st.floats(-5.0, 5.0),
        st.floats(0.1, 50.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_ray_parallel_to_projected_point(self, x, y, z):
        cam = CameraModel(500.0, (256.0, 256.0), (512, 512))
        X = np.array([x, y, z])
        ray = calibrated_ray(cam, project(cam, X))
        assert np.linalg.norm(np.cross(ray, X)) < 1e-9 * np.linalg.norm(X)


class TestWireframeJson:
    def wf(self):
        return Wireframe(
            [
                Vertex((1.5, 2.25), JunctionType.C, depth=3.0),
                Vertex((10.0, 2.0), JunctionType.C),
                Vertex((5.0, 9.0), JunctionType.T, depth=7.5),
            ],
            [(1, 0), (2, 1)],
            (64, 32),
        )

    def test_round_trip(self):
        wf = self.wf()
        again = wireframe_from_json(wireframe_to_json(wf))
        assert again == wf

    def test_canonical_edge_ordering(self):
        doc = wireframe_to_json(self.wf())
        assert doc["edges"] == [[0, 1], [1, 2]]

    def test_schema_shape(self):
        doc = wireframe_to_json(self.wf())
        assert set(doc) == {"image_size", "vertices", "edges"}
        assert doc["image_size"] == [64, 32]
        assert doc["vertices"][0] == {"xy": [1.5, 2.25], "type": "C", "depth": 3.0}
        assert doc["vertices"][1]["depth"] is None
        assert doc["vertices"][2]["type"] == "T"

    def test_dumps_loads_stability(self):
        text = dumps_wireframe(self.wf())
        assert dumps_wireframe(loads_wireframe(text)) == text
        json.loads(text)  # stays plain JSON


class TestVanishingPoints:
    def test_matrix_round_trip(self):
        vps = VanishingPoints.from_pixels((100.0, 0.0), (-40.0, 3.0), (2.0, 900.0))
        again = VanishingPoints.from_matrix(vps.as_matrix())
        assert np.allclose(again.as_matrix(), vps.as_matrix())

    def test_pixel_points_inverts_normalization(self):
        pts = [(100.0, 0.0), (-40.0, 3.0), (2.0, 900.0)]
        vps = VanishingPoints.from_pixels(*pts)
        assert np.allclose(vps.pixel_points(), pts, atol=1e-9)

    def test_camera_rejects_nonpositive_focal(self):
        with pytest.raises(ValueError):
            CameraModel(0.0, (0.0, 0.0), (8, 8))
