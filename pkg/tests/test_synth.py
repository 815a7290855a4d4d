import numpy as np
import pytest

from sargram import geo, synth
from sargram.errors import FootprintMiss


class TestMakeDsm:
    def test_flat(self):
        spec = synth.standard_scene(extent=(200.0, 200.0), dsm_kind="flat",
                                    dsm_params={"height": 100.0})
        dsm = synth.make_dsm(spec)
        assert np.all(dsm.raster.plane() == 100.0)

    def test_ramp_corners_exact(self):
        spec = synth.standard_scene(extent=(200.0, 200.0), dsm_kind="ramp",
                                    dsm_params={"start": 0.0, "end": 50.0, "axis": "east"})
        dsm = synth.make_dsm(spec)
        v = dsm.raster.plane()
        assert v[0, 0] == pytest.approx(0.0, abs=1e-6)
        assert v[0, -1] == pytest.approx(50.0, abs=1e-6)
        assert v[-1, 0] == pytest.approx(0.0, abs=1e-6)
        # linearity along the axis
        mid = v[0, v.shape[1] // 2]
        assert mid == pytest.approx(25.0, abs=0.15)

    def test_gaussian_hill_center_value(self):
        spec = synth.standard_scene(
            extent=(400.0, 400.0), dsm_kind="gaussian-hills",
            dsm_params={"base": 50.0,
                        "hills": [{"amplitude": 200.0, "sigma": 300.0, "center": (0.0, 0.0)}]},
        )
        dsm = synth.make_dsm(spec)
        v = dsm.raster.plane()
        center = v[v.shape[0] // 2, v.shape[1] // 2]
        assert center == pytest.approx(250.0, abs=1e-6)

    def test_north_up_grid(self):
        spec = synth.standard_scene(extent=(200.0, 200.0))
        dsm = synth.make_dsm(spec)
        assert dsm.lat_spacing < 0
        assert dsm.lon_spacing > 0


class TestSceneFactory:
    def test_opposite_side_mirror_tracks(self):
        spec = synth.standard_scene(intersection_angle=43.0)
        assert spec.track_a.cross_offset == pytest.approx(-spec.track_b.cross_offset)
        assert spec.track_a.look_side == "right"
        assert spec.track_b.look_side == "left"

    def test_same_side_tracks(self):
        spec = synth.standard_scene(geometry="same", ref_incidence=70.0)
        assert spec.track_a.cross_offset < spec.track_b.cross_offset < 0
        assert spec.track_b.look_side == "right"

    def test_intersection_angle_bounds(self):
        with pytest.raises(ValueError):
            synth.standard_scene(intersection_angle=3.0)
        with pytest.raises(ValueError):
            synth.standard_scene(intersection_angle=95.0)

    def test_same_side_needs_room(self):
        with pytest.raises(ValueError):
            synth.standard_scene(geometry="same", ref_incidence=40.0,
                                 intersection_angle=43.0)

    def test_track_through_scene_rejected(self):
        spec = synth.standard_scene(extent=(200.0, 200.0))
        bad = synth.SceneSpec(
            extent=spec.extent, dsm_kind="flat", dsm_params={"height": 0.0},
            track_a=synth.TrackSpec(altitude=8000.0, speed=100.0,
                                    cross_offset=50.0, look_side="right"),
            track_b=spec.track_b,
        )
        with pytest.raises(FootprintMiss):
            synth.scene_models(bad)


class TestRender:
    def test_deterministic(self, small_scene_spec, rendered_small_scene):
        again = synth.render_pair(small_scene_spec)
        assert np.array_equal(
            again.ref.amplitude.values, rendered_small_scene.ref.amplitude.values
        )
        assert np.array_equal(
            again.src.amplitude.values, rendered_small_scene.src.amplitude.values
        )

    def test_mean_amplitude_tracks_texture(self, rendered_small_scene):
        for img in (rendered_small_scene.ref, rendered_small_scene.src):
            amp = img.amplitude.plane()
            lit = amp[amp > 0]
            assert abs(float(lit.mean()) - 1.0) < 0.05

    def test_no_empty_columns_in_swath(self, rendered_small_scene):
        amp = rendered_small_scene.ref.amplitude.plane()
        lit_cols = np.nonzero((amp > 0).any(axis=0))[0]
        swath = amp[:, lit_cols.min():lit_cols.max() + 1]
        rows_lit = (swath > 0).any(axis=0)
        assert rows_lit.all()

    def test_speckle_variant(self, small_scene_spec):
        import dataclasses

        spec = dataclasses.replace(small_scene_spec, speckle_looks=4,
                                   extent=(200.0, 200.0))
        scene = synth.render_pair(spec)
        clean = synth.render_pair(dataclasses.replace(spec, speckle_looks=0))
        assert scene.ref.model.rows == clean.ref.model.rows
        a = scene.ref.amplitude.plane()
        b = clean.ref.amplitude.plane()
        lit = b > 0
        assert not np.array_equal(a, b)
        # multiplicative noise keeps the mean roughly unchanged
        assert abs(a[lit].mean() / b[lit].mean() - 1.0) < 0.05


class TestLayover:
    def test_steep_hill_flags_reversal(self):
        spec = synth.standard_scene(
            extent=(300.0, 300.0), dsm_kind="gaussian-hills",
            dsm_params={"base": 50.0,
                        "hills": [{"amplitude": 130.0, "sigma": 60.0, "center": (0.0, 0.0)}]},
        )
        scene = synth.render_pair(spec)
        # slope exceeds tan(incidence): the range gradient reverses somewhere
        assert scene.layover.raster.plane().sum() > 0

    def test_gentle_scene_is_clean(self, rendered_small_scene):
        assert rendered_small_scene.layover.raster.plane().sum() == 0


class TestSpeckleHelpers:
    def test_speckle_block_deterministic(self):
        a = synth.speckle_block(64, 64, seed=3)
        b = synth.speckle_block(64, 64, seed=3)
        c = synth.speckle_block(64, 64, seed=4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert a.min() >= 0

    def test_fourier_shift_integer_equals_roll(self):
        img = synth.speckle_block(32, 32, seed=5)
        shifted = synth.fourier_shift(img, (3.0, -2.0))
        rolled = np.roll(img, (3, -2), axis=(0, 1))
        assert np.allclose(shifted, rolled, atol=1e-10)

    def test_ground_texture_stats(self):
        t = synth.ground_texture((256, 256), seed=6)
        assert t.min() >= 0.05
        assert abs(float(t.mean()) - 1.0) < 0.02
