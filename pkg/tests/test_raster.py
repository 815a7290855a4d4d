import json
import math
import struct

import numpy as np
import pytest

from sargram import geo, raster
from sargram.errors import (
    DimensionOverflow,
    InconsistentTrajectory,
    MalformedHeader,
    MissingField,
    TruncatedPayload,
)


class TestGridFormat:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        values = rng.standard_normal((17, 23, 3)).astype(np.float32)
        r = raster.Raster(values, nodata=-9999.0)
        path = tmp_path / "grid.srgr"
        raster.write_raster(r, path)
        r2 = raster.read_raster(path)
        assert r2.rows == 17 and r2.cols == 23 and r2.channels == 3
        assert r2.nodata == -9999.0
        assert np.array_equal(
            r.values.view(np.uint32), r2.values.view(np.uint32)
        ), "payload must survive bit-for-bit"

    def test_payload_layout_is_row_major_le(self, tmp_path):
        r = raster.Raster(np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32))
        path = tmp_path / "g.srgr"
        raster.write_raster(r, path)
        blob = path.read_bytes()
        assert blob[:4] == b"SRGR"
        assert len(blob) == 64 + 16
        assert blob[64:] == struct.pack("<4f", 1.0, 2.0, 3.0, 4.0)

    def test_truncated_payload(self, tmp_path):
        r = raster.Raster(np.ones((4, 4), dtype=np.float32))
        path = tmp_path / "g.srgr"
        raster.write_raster(r, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(TruncatedPayload):
            raster.read_raster(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "g.srgr"
        path.write_bytes(b"NOPE" + b"\x00" * 76)
        with pytest.raises(MalformedHeader):
            raster.read_raster(path)

    def test_dimension_overflow(self, tmp_path):
        r = raster.Raster(np.ones((2, 2), dtype=np.float32))
        path = tmp_path / "g.srgr"
        raster.write_raster(r, path)
        blob = bytearray(path.read_bytes())
        # rewrite the u64 dims to an absurd size
        blob[8:16] = struct.pack("<Q", 1 << 34)
        blob[16:24] = struct.pack("<Q", 1 << 10)
        path.write_bytes(bytes(blob))
        with pytest.raises(DimensionOverflow):
            raster.read_raster(path)

    def test_nan_nodata_round_trip(self, tmp_path):
        values = np.array([[1.0, np.nan], [3.0, 4.0]], dtype=np.float32)
        r = raster.Raster(values)
        assert r.nodata is None
        path = tmp_path / "g.srgr"
        raster.write_raster(r, path)
        r2 = raster.read_raster(path)
        assert r2.nodata is None
        assert np.isnan(r2.plane()[0, 1])
        assert np.array_equal(r2.valid_mask(), [[True, False], [True, True]])


def _manifest_doc(model, amplitude=None):
    return raster.manifest_dict(model, image_id="img-a", amplitude=amplitude)


class TestManifest:
    def test_minimal_round_trip(self, tmp_path, small_models):
        model, _ = small_models
        path = tmp_path / "manifest.json"
        raster.write_manifest(model, path, image_id="img-a")
        loaded, amp = raster.read_manifest(path)
        assert amp is None
        assert loaded.rows == model.rows and loaded.cols == model.cols
        assert loaded.near_range == model.near_range
        assert loaded.look_side == model.look_side
        assert np.allclose(loaded.trajectory.positions, model.trajectory.positions)

    def test_two_sample_manifest(self, tmp_path):
        doc = {
            "id": "tiny",
            "rows": 10,
            "cols": 12,
            "near_range_m": 9000.0,
            "range_spacing_m": 1.0,
            "azimuth_start_time_s": 0.0,
            "azimuth_time_spacing_s": 0.01,
            "look_side": "right",
            "ellipsoid": {"a_m": 6378137.0, "f": 1.0 / 298.257223563},
            "trajectory": [
                {"t_s": 0.0, "pos_ecef_m": [6388137.0, 0.0, 0.0], "vel_ecef_mps": [0.0, 100.0, 0.0]},
                {"t_s": 1.0, "pos_ecef_m": [6388137.0, 100.0, 0.0], "vel_ecef_mps": [0.0, 100.0, 0.0]},
            ],
        }
        path = tmp_path / "m.json"
        path.write_text(json.dumps(doc))
        model, _ = raster.read_manifest(path)
        assert model.rows == 10 and model.cols == 12
        assert model.reference_elevation == 0.0, "missing optional field defaults to 0"

    def test_missing_field_named(self, tmp_path, small_models):
        model, _ = small_models
        doc = _manifest_doc(model)
        del doc["near_range_m"]
        path = tmp_path / "m.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(MissingField) as excinfo:
            raster.read_manifest(path)
        assert "near_range_m" in str(excinfo.value)

    def test_shuffled_trajectory_rejected(self, tmp_path, small_models):
        model, _ = small_models
        doc = _manifest_doc(model)
        doc["trajectory"] = doc["trajectory"][::-1]
        path = tmp_path / "m.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(InconsistentTrajectory):
            raster.read_manifest(path)


def _unit_georaster(values, lat0_deg=36.0, lon0_deg=139.0, spacing_deg=1e-5):
    return raster.GeoRaster(
        raster=raster.Raster(np.asarray(values, dtype=np.float32)),
        origin=geo.GeodeticCoord.from_degrees(lat0_deg, lon0_deg),
        lat_spacing=-math.radians(spacing_deg),
        lon_spacing=math.radians(spacing_deg),
    )


class TestBilinear:
    def test_exact_on_cell_center(self):
        g = _unit_georaster(np.arange(12.0).reshape(3, 4))
        lat, lon = g.cell_center(np.array([1]), np.array([2]))
        v = raster.sample_bilinear(g, geo.GeodeticCoord(float(lat[0]), float(lon[0])))
        assert v == pytest.approx(6.0, abs=1e-6)

    def test_midpoint_of_four_cells(self):
        g = _unit_georaster([[0.0, 0.0], [10.0, 10.0]])
        lat, lon = g.cell_center(np.array([0.5]), np.array([0.5]))
        v = raster.sample_bilinear(g, geo.GeodeticCoord(float(lat[0]), float(lon[0])))
        assert v == pytest.approx(5.0, abs=1e-9)

    def test_outside_is_nodata(self):
        g = _unit_georaster([[0.0, 0.0], [10.0, 10.0]])
        lat, lon = g.cell_center(np.array([3.0]), np.array([0.0]))
        v = raster.sample_bilinear(g, geo.GeodeticCoord(float(lat[0]), float(lon[0])))
        assert math.isnan(v)

    def test_nodata_neighbor_poisons(self):
        g = _unit_georaster([[np.nan, 0.0], [10.0, 10.0]])
        lat, lon = g.cell_center(np.array([0.5]), np.array([0.5]))
        v = raster.sample_bilinear(g, geo.GeodeticCoord(float(lat[0]), float(lon[0])))
        assert math.isnan(v)

    def test_continuity_inside(self):
        rng = np.random.default_rng(2)
        g = _unit_georaster(rng.uniform(0, 100, (8, 8)))
        base_r, base_c = 3.3, 4.6
        lat0, lon0 = g.cell_center(base_r, base_c)
        v0 = raster.sample_bilinear(g, geo.GeodeticCoord(float(lat0), float(lon0)))
        for eps in (1e-7, -1e-7):
            lat, lon = g.cell_center(base_r + eps, base_c - eps)
            v = raster.sample_bilinear(g, geo.GeodeticCoord(float(lat), float(lon)))
            assert v == pytest.approx(v0, abs=1e-3)

    def test_georaster_file_round_trip(self, tmp_path):
        g = _unit_georaster(np.arange(6.0).reshape(2, 3))
        raster.write_georaster(g, tmp_path / "dsm.json")
        g2 = raster.read_georaster(tmp_path / "dsm.json")
        assert np.array_equal(g.raster.values, g2.raster.values)
        assert g2.origin.latitude == pytest.approx(g.origin.latitude, abs=1e-15)
        assert g2.lat_spacing == pytest.approx(g.lat_spacing, rel=1e-12)
