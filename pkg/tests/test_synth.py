"""Projective geometry and the multi-plane renderer against closed-form oracles."""

import math

import numpy as np
import pytest

from epifield import (
    CameraModel,
    SceneLayer,
    ScenePoint,
    SceneSpec,
    Translation,
    disparity_slope,
    epi_slope,
    extract_epi,
    project_point,
    render_dense_lightfield,
)
from epifield.synth import (
    render_view,
    texture_checker,
    texture_constant,
    texture_sinusoid,
    texture_smooth_noise,
    random_scene,
)

from util import fit_line_slope, shift_rows_linear, single_plane_scene, track_feature_columns


class TestProjection:
    def test_unit_point_at_origin_view(self):
        cam = CameraModel(focal=1.0, disparity_scale=1.0)
        s, t, d = project_point(cam, ScenePoint(0.0, 0.0, 1.0), (0.0, 0.0))
        assert (s, t, d) == (0.0, 0.0, 1.0)

    def test_point_off_axis(self):
        cam = CameraModel(focal=1.0, disparity_scale=1.0)
        s, t, d = project_point(cam, ScenePoint(2.0, 0.0, 2.0), (0.0, 0.0))
        assert (s, t, d) == (1.0, 0.0, 0.5)

    def test_pixel_shift_per_unit_view_matches_slope(self):
        """The difference of two projections is the EPI slope -focal/Z."""
        cam = CameraModel(focal=1.0, disparity_scale=1.0)
        p = ScenePoint(2.0, 0.0, 2.0)
        s0, _, _ = project_point(cam, p, (0.0, 0.0))
        s1, _, _ = project_point(cam, p, (1.0, 0.0))
        assert s1 - s0 == pytest.approx(-0.5)
        assert s1 - s0 == pytest.approx(epi_slope(cam, p.z))

    def test_rejects_nonpositive_depth(self):
        with pytest.raises(ValueError, match="positive"):
            ScenePoint(0.0, 0.0, 0.0)
        with pytest.raises(ValueError, match="positive"):
            epi_slope(CameraModel(), -1.0)

    def test_ray_constraint_roundtrip(self):
        """Projection satisfies the light-ray constraint exactly: the view
        coordinate is recoverable as u = X - (B/f) * s / d."""
        cam = CameraModel(focal=2.5, disparity_scale=1.75)
        p = ScenePoint(1.2, -0.7, 3.1)
        for u, v in [(0.0, 0.0), (2.0, 1.0), (-1.5, 0.25)]:
            s, t, d = project_point(cam, p, (u, v))
            ratio = cam.disparity_scale / cam.focal
            assert p.x - ratio * s / d == pytest.approx(u, abs=1e-12)
            assert p.y - ratio * t / d == pytest.approx(v, abs=1e-12)


class TestSlopes:
    def test_slope_from_depth(self):
        assert epi_slope(CameraModel(focal=2.0), 4.0) == pytest.approx(-0.5)

    def test_slope_vanishes_at_infinity(self):
        assert epi_slope(CameraModel(), math.inf) == 0.0

    def test_slope_from_disparity(self):
        cam = CameraModel(focal=1.0, disparity_scale=1.0)
        assert disparity_slope(cam, 1.5) == pytest.approx(-1.5)

    def test_depth_and_disparity_slopes_agree(self):
        cam = CameraModel(focal=2.0, disparity_scale=3.0)
        z = 5.0
        assert epi_slope(cam, z, 0.7) == pytest.approx(
            disparity_slope(cam, cam.disparity(z), 0.7)
        )


class TestRenderer:
    def test_zero_disparity_layer_gives_identical_views(self):
        """A layer at infinite depth renders the same image in every view."""
        rng = np.random.default_rng(0)
        scene = single_plane_scene(0.0, CameraModel(), 24, 8, 9, rng)
        lf = render_dense_lightfield(scene, CameraModel(), (9, 2, 24, 8))
        for u in range(1, 9):
            np.testing.assert_array_equal(lf.samples[u], lf.samples[0])
        epi = extract_epi(lf, 0, 4)
        assert np.all(epi.pixels == epi.pixels[0])

    def test_integer_slope_shifts_texture_rows_exactly(self):
        """slope -1 px/view: EPI row u equals the texture row shifted by u."""
        cam = CameraModel()
        tex = texture_checker((64, 12), cell=3)
        scene = SceneSpec(
            layers=[SceneLayer(depth=1.0, texture=tex, offset_s=-16.0)],
            background=(0.5, 0.5, 0.5),
        )
        lf = render_dense_lightfield(scene, cam, (9, 1, 32, 12))
        t = 5
        epi = extract_epi(lf, 0, t)
        for u in range(9):
            # pixel s of row u shows texture column s + 16 + u
            cols = np.arange(32) + 16 + u
            np.testing.assert_array_equal(epi.pixels[u], tex[t, cols])

    def test_occlusion_near_layer_wins_where_lines_cross(self):
        """An opaque near strip must overwrite the far texture along its
        EPI line, which stays unbroken."""
        cam = CameraModel()
        far_tex = texture_smooth_noise((48, 12), np.random.default_rng(1), lo=0.4, hi=1.0)
        near_color = (1.0, 0.1, 0.1)
        near_tex = texture_constant((4, 12), near_color)
        scene = SceneSpec(
            layers=[
                SceneLayer(depth=math.inf, texture=far_tex, offset_s=-8.0, offset_t=0.0),
                SceneLayer(depth=1.0, texture=near_tex, offset_s=20.0, offset_t=0.0),
            ],
            background=(0.0, 0.0, 0.0),
        )
        lf = render_dense_lightfield(scene, cam, (9, 1, 32, 12))
        epi = extract_epi(lf, 0, 6)
        for u in range(9):
            # near strip occupies texture extent [20, 23]; at view u it is
            # seen at s in [20 - u, 23 - u]
            inside = np.arange(20 - u, 24 - u)
            np.testing.assert_allclose(
                epi.pixels[u, inside], np.broadcast_to(near_color, (4, 3)), atol=1e-6
            )
            covered = np.union1d(np.arange(19 - u, 25 - u), np.arange(19, 25))
            outside = np.setdiff1d(np.arange(32), covered)
            np.testing.assert_array_equal(epi.pixels[u, outside], epi.pixels[0, outside])

    def test_out_of_extent_shows_background(self):
        scene = SceneSpec(
            layers=[SceneLayer(depth=2.0, texture=texture_constant((4, 4), (1, 1, 1)))],
            background=(0.25, 0.5, 0.75),
        )
        img = render_view(scene, CameraModel(), (0.0, 0.0), (16, 16))
        np.testing.assert_allclose(img[10:, 10:], np.broadcast_to([0.25, 0.5, 0.75], (6, 6, 3)))

    def test_empty_scene_rejected(self):
        with pytest.raises(ValueError, match="at least one layer"):
            SceneSpec(layers=[])

    def test_layers_must_be_far_to_near(self):
        tex = texture_constant((2, 2), (1, 1, 1))
        with pytest.raises(ValueError, match="far to near"):
            SceneSpec(layers=[SceneLayer(1.0, tex), SceneLayer(2.0, tex)])


class TestLineSlopeFidelity:
    @pytest.mark.parametrize("slope", [0.3, 0.55, 0.8, 1.2, 1.6])
    def test_tracked_feature_slope_within_one_percent(self, slope):
        """Least-squares fit through a tracked blob across views matches
        -focal/depth to 1%."""
        from epifield.synth import texture_blob

        cam = CameraModel()
        depth = cam.focal / slope
        nu, ns, nt = 9, 48, 11
        travel = int(np.ceil(slope * nu)) + 2
        # keep the blob at least 8 px inside the EPI at every view
        tex = texture_blob((ns + travel, nt), center=(travel + 24.0, 5.0), sigma=2.0)
        scene = SceneSpec(layers=[SceneLayer(depth=depth, texture=tex, offset_s=-travel)])
        lf = render_dense_lightfield(scene, cam, (nu, 1, ns, nt))
        epi = extract_epi(lf, 0, 5)
        centers = track_feature_columns(epi.pixels)
        fitted = fit_line_slope(centers)
        expected = epi_slope(cam, depth)
        assert abs(fitted - expected) <= 0.01 * abs(expected)


class TestTranslationConsistency:
    def test_shifted_view_plane_equals_resampled_epi_rows(self):
        """Rendering from a view plane moved by tx equals resampling every
        EPI row by (focal/Z) * tx, within bilinear tolerance away from the
        texture boundary."""
        cam = CameraModel()
        slope = 0.8
        depth = cam.focal / slope
        nu, ns, nt = 9, 48, 8
        tx = 0.45
        tex = texture_sinusoid((96, nt + 2), freq_x=0.06, freq_y=0.05)
        scene = SceneSpec(
            layers=[SceneLayer(depth=depth, texture=tex, offset_s=-24.0, offset_t=-1.0)]
        )
        base = render_dense_lightfield(scene, cam, (nu, 1, ns, nt))
        moved = render_dense_lightfield(
            scene, cam, (nu, 1, ns, nt), origin=Translation(tx=tx)
        )
        shift = (cam.focal / depth) * tx
        margin = 3
        for t in range(nt):
            epi_base = extract_epi(base, 0, t).pixels
            epi_moved = extract_epi(moved, 0, t).pixels
            for u in range(nu):
                expected = shift_rows_linear(epi_base[u], shift)
                err = np.abs(expected - epi_moved[u])[margin:-margin]
                assert err.max() <= 2.0 / 255.0


class TestSceneConfig:
    def test_texture_from_file_and_procedural(self, tmp_path):
        import json

        from PIL import Image

        from epifield.synth import load_scene_config
        from epifield.lightfield import to_uint8

        tex = texture_checker((16, 8), cell=4)
        Image.fromarray(to_uint8(tex), "RGB").save(tmp_path / "tex.png")
        cfg = {
            "camera": {"focal": 2.0, "disparity_scale": 1.0},
            "view_step": 0.5,
            "grid": [3, 1, 16, 8],
            "background": [0.1, 0.1, 0.1],
            "layers": [
                {"depth": "inf", "texture": {"kind": "constant", "size": [16, 8], "color": [0.5, 0.5, 0.5]}},
                {"disparity": 0.5, "offset": [2, 0], "texture": {"file": "tex.png"}},
            ],
        }
        path = tmp_path / "scene.json"
        path.write_text(json.dumps(cfg))
        scene, camera, grid, view_step = load_scene_config(path)
        assert camera.focal == 2.0 and view_step == 0.5 and grid == (3, 1, 16, 8)
        assert len(scene.layers) == 2
        assert scene.layers[0].depth == math.inf
        assert scene.layers[1].depth == pytest.approx(2.0)  # B / d = 1 / 0.5
        np.testing.assert_allclose(scene.layers[1].texture, tex, atol=1 / 255)

    def test_unknown_texture_kind_rejected(self, tmp_path):
        import json

        from epifield.synth import load_scene_config

        cfg = {
            "grid": [2, 1, 8, 8],
            "layers": [{"depth": 1.0, "texture": {"kind": "plasma", "size": [8, 8]}}],
        }
        path = tmp_path / "scene.json"
        path.write_text(json.dumps(cfg))
        with pytest.raises(ValueError, match="texture kind"):
            load_scene_config(path)


class TestRandomScene:
    def test_random_scene_renders_in_range(self):
        rng = np.random.default_rng(42)
        cam = CameraModel()
        scene = random_scene(rng, (32, 16), cam, n_layers=3, max_views=18)
        lf = render_dense_lightfield(scene, cam, (18, 1, 32, 16))
        assert lf.samples.min() >= 0.0 and lf.samples.max() <= 1.0
        depths = [layer.depth for layer in scene.layers]
        assert depths == sorted(depths, reverse=True)
