import math

import numpy as np
import pytest

from sargram import geo, metrics, raster, reconstruct
from sargram.errors import DimensionMismatch, NoOverlap


def _brute_loss_disparity(d_hat, d, c, normalize_by_support=False):
    """Independent oracle: plain Python loops and fsum."""
    rows, cols = c.shape
    terms = []
    support = 0
    for i in range(rows):
        for j in range(cols):
            if c[i, j] > 0:
                support += 1
                dy = float(d_hat[i, j, 0]) - float(d[i, j, 0])
                dx = float(d_hat[i, j, 1]) - float(d[i, j, 1])
                terms.append(float(c[i, j]) * math.hypot(dy, dx))
    denom = support if normalize_by_support else rows * cols
    return math.fsum(terms) / denom if denom else 0.0


def _brute_loss_confidence(c_hat, c, negate=True):
    rows, cols = c.shape
    terms = []
    for i in range(rows):
        for j in range(cols):
            p = min(max(float(c_hat[i, j]), 1e-7), 1 - 1e-7)
            t = float(c[i, j]) * math.log(p) + (1 - float(c[i, j])) * math.log(1 - p)
            terms.append(t)
    total = math.fsum(terms) / (rows * cols)
    return -total if negate else total


class TestLossDisparity:
    def test_identity_is_zero(self):
        rng = np.random.default_rng(0)
        d = rng.uniform(-3, 3, (8, 9, 2))
        c = (rng.uniform(0, 1, (8, 9)) > 0.4).astype(np.float64)
        assert metrics.loss_disparity(d, d, c) == 0.0

    def test_three_four_five_fixture(self):
        d_hat = np.zeros((2, 1, 2))
        d_hat[0, 0] = (3.0, 4.0)
        d = np.zeros((2, 1, 2))
        c = np.ones((2, 1))
        assert metrics.loss_disparity(d_hat, d, c) == pytest.approx(2.5, rel=1e-15)

    def test_against_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            d_hat = rng.uniform(-5, 5, (17, 13, 2))
            d = rng.uniform(-5, 5, (17, 13, 2))
            c = (rng.uniform(0, 1, (17, 13)) > 0.5).astype(np.float64)
            got = metrics.loss_disparity(d_hat, d, c)
            want = _brute_loss_disparity(d_hat, d, c)
            assert got == pytest.approx(want, rel=1e-12)

    def test_support_normalized_mode(self):
        rng = np.random.default_rng(2)
        d_hat = rng.uniform(-5, 5, (6, 6, 2))
        d = rng.uniform(-5, 5, (6, 6, 2))
        c = np.zeros((6, 6))
        c[:2] = 1.0
        cfg = metrics.LossConfig(normalize_by_support=True)
        got = metrics.loss_disparity(d_hat, d, c, cfg)
        want = _brute_loss_disparity(d_hat, d, c, normalize_by_support=True)
        assert got == pytest.approx(want, rel=1e-12)

    def test_scaling_linearity(self):
        rng = np.random.default_rng(3)
        d = rng.uniform(-5, 5, (6, 7, 2))
        delta = rng.uniform(-2, 2, (6, 7, 2))
        c = np.ones((6, 7))
        base = metrics.loss_disparity(d + delta, d, c)
        scaled = metrics.loss_disparity(d + 3.5 * delta, d, c)
        assert scaled == pytest.approx(3.5 * base, rel=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            metrics.loss_disparity(np.zeros((2, 2, 2)), np.zeros((2, 3, 2)), np.ones((2, 2)))


class TestLossConfidence:
    def test_half_prediction_is_ln2(self):
        for c_value in (0.0, 1.0):
            c_hat = np.full((5, 5), 0.5)
            c = np.full((5, 5), c_value)
            got = metrics.loss_confidence(c_hat, c)
            assert got == pytest.approx(math.log(2.0), rel=1e-12)

    def test_perfect_prediction_near_zero(self):
        rng = np.random.default_rng(4)
        c = (rng.uniform(0, 1, (9, 9)) > 0.5).astype(np.float64)
        got = metrics.loss_confidence(c.copy(), c)
        assert got < 1e-6

    def test_against_brute_force(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            c_hat = rng.uniform(0.01, 0.99, (11, 7))
            c = (rng.uniform(0, 1, (11, 7)) > 0.5).astype(np.float64)
            got = metrics.loss_confidence(c_hat, c)
            want = _brute_loss_confidence(c_hat, c)
            assert got == pytest.approx(want, rel=1e-12)

    def test_as_printed_mode_is_negated_standard(self):
        rng = np.random.default_rng(6)
        c_hat = rng.uniform(0.1, 0.9, (6, 6))
        c = (rng.uniform(0, 1, (6, 6)) > 0.5).astype(np.float64)
        std = metrics.loss_confidence(c_hat, c)
        printed = metrics.loss_confidence(
            c_hat, c, metrics.LossConfig(bce_sign=metrics.BCE_AS_PRINTED)
        )
        assert printed == pytest.approx(-std, rel=1e-15)

    def test_minimized_at_truth(self):
        rng = np.random.default_rng(7)
        c = (rng.uniform(0, 1, (8, 8)) > 0.5).astype(np.float64)
        base = metrics.loss_confidence(c.copy(), c)
        for _ in range(10):
            perturbed = np.clip(c + rng.uniform(-0.2, 0.2, c.shape), 0.0, 1.0)
            assert metrics.loss_confidence(perturbed, c) >= base


class TestLossTotal:
    def test_zero_weight(self):
        cfg = metrics.LossConfig(weight=0.0)
        assert metrics.loss_total(2.5, 100.0, cfg) == 2.5

    def test_fixture_value(self):
        cfg = metrics.LossConfig(weight=0.01)
        got = metrics.loss_total(2.5, math.log(2.0), cfg)
        assert got == pytest.approx(2.5 + 0.01 * math.log(2.0), rel=1e-15)

    def test_linearity_in_weight(self):
        ld, lc = 1.7, 0.9
        values = [
            metrics.loss_total(ld, lc, metrics.LossConfig(weight=w))
            for w in (0.0, 0.5, 1.0, 2.0)
        ]
        diffs = np.diff(values)
        assert np.allclose(diffs, (0.5 * lc, 0.5 * lc, 1.0 * lc))


def _flat_map(values, lat0=36.0, lon0=139.0, cell=2.0):
    values = np.asarray(values, dtype=np.float32)
    dlon, dlat = geo.meters_to_angles(math.radians(lat0), cell, cell)
    g = raster.GeoRaster(
        raster=raster.Raster(values),
        origin=geo.GeodeticCoord.from_degrees(lat0, lon0),
        lat_spacing=-dlat, lon_spacing=dlon,
    )
    support = raster.Raster((~np.isnan(values)).astype(np.float32))
    return reconstruct.ElevationMap(elevation=g, support=support), g


class TestErrorStats:
    def test_identical_grids(self):
        rng = np.random.default_rng(8)
        values = rng.uniform(50, 150, (20, 20))
        emap, truth = _flat_map(values)
        stats = metrics.error_stats(emap, truth, thresholds=(0.5, 2.0))
        assert stats.mean_error == pytest.approx(0.0, abs=1e-4)
        assert stats.std_error == pytest.approx(0.0, abs=1e-4)
        assert stats.pct_within[0.5] == 100.0
        assert stats.pct_within[2.0] == 100.0
        assert stats.coverage == pytest.approx(1.0)

    def test_pm_one_three_fixture(self):
        truth_vals = np.full((2, 2), 100.0, dtype=np.float32)
        measured = np.array([[101.0, 99.0], [103.0, 97.0]], dtype=np.float32)
        emap, _ = _flat_map(measured)
        _, truth = _flat_map(truth_vals)
        stats = metrics.error_stats(emap, truth, thresholds=(2.0,))
        assert stats.mean_error == pytest.approx(0.0, abs=1e-6)
        assert stats.std_error == pytest.approx(math.sqrt(5.0), rel=1e-6)
        assert stats.pct_within[2.0] == pytest.approx(50.0)

    def test_against_two_pass_oracle(self):
        rng = np.random.default_rng(9)
        truth_vals = rng.uniform(50, 150, (40, 40)).astype(np.float32)
        noise = rng.normal(0, 2, (40, 40)).astype(np.float32)
        emap, _ = _flat_map(truth_vals + noise)
        _, truth = _flat_map(truth_vals)
        stats = metrics.error_stats(emap, truth, thresholds=(1.0, 2.0, 4.0))

        errors = []
        for i in range(40):
            for j in range(40):
                errors.append(float(noise[i, j]))
        mean = math.fsum(errors) / len(errors)
        var = math.fsum((e - mean) ** 2 for e in errors) / len(errors)
        assert stats.mean_error == pytest.approx(mean, abs=1e-6)
        assert stats.std_error == pytest.approx(math.sqrt(var), abs=1e-6)

    def test_pct_monotone_in_threshold(self):
        rng = np.random.default_rng(10)
        truth_vals = rng.uniform(50, 150, (30, 30)).astype(np.float32)
        emap, _ = _flat_map(truth_vals + rng.normal(0, 3, (30, 30)).astype(np.float32))
        _, truth = _flat_map(truth_vals)
        taus = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
        stats = metrics.error_stats(emap, truth, thresholds=taus)
        values = [stats.pct_within[t] for t in taus]
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_no_overlap(self):
        measured = np.full((4, 4), np.nan, dtype=np.float32)
        emap, _ = _flat_map(measured)
        _, truth = _flat_map(np.full((4, 4), 100.0, dtype=np.float32))
        with pytest.raises(NoOverlap):
            metrics.error_stats(emap, truth)

    def test_emitters(self):
        emap, truth = _flat_map(np.full((8, 8), 100.0, dtype=np.float32))
        stats = metrics.error_stats(emap, truth, thresholds=(2.0,))
        assert '"mean_error_m"' in stats.to_json()
        table = stats.to_table("synthetic")
        assert "mean [m]" in table and "synthetic" in table
        csv_text = stats.to_curve_csv()
        assert csv_text.splitlines()[0] == "threshold_m,pct_within"


class TestRenderErrorMap:
    def test_zero_error_uniform_midscale(self, tmp_path):
        values = np.full((16, 16), 100.0, dtype=np.float32)
        values[0, 0] = np.nan
        emap, _ = _flat_map(values)
        _, truth = _flat_map(np.full((16, 16), 100.0, dtype=np.float32))
        path = tmp_path / "err.png"
        metrics.render_error_map(emap, truth, path)
        from PIL import Image

        img = np.asarray(Image.open(path))
        assert tuple(img[0, 0]) == (128, 128, 128), "nodata cell is gray"
        assert tuple(img[8, 8]) == (255, 255, 255), "zero error is mid-scale white"

    def test_checkerboard_extremes(self, tmp_path):
        base = np.full((16, 16), 100.0, dtype=np.float32)
        checker = np.indices((16, 16)).sum(axis=0) % 2
        measured = base + np.where(checker, 5.0, -5.0).astype(np.float32)
        emap, _ = _flat_map(measured)
        _, truth = _flat_map(base)
        path = tmp_path / "err.png"
        metrics.render_error_map(emap, truth, path, vmax=5.0)
        from PIL import Image

        img = np.asarray(Image.open(path))
        assert tuple(img[0, 0]) == (0, 0, 255)
        assert tuple(img[0, 1]) == (255, 0, 0)

    def test_deterministic_bytes(self, tmp_path):
        rng = np.random.default_rng(11)
        truth_vals = rng.uniform(50, 150, (12, 12)).astype(np.float32)
        emap, _ = _flat_map(truth_vals + rng.normal(0, 2, (12, 12)).astype(np.float32))
        _, truth = _flat_map(truth_vals)
        p1 = tmp_path / "a.png"
        p2 = tmp_path / "b.png"
        metrics.render_error_map(emap, truth, p1)
        metrics.render_error_map(emap, truth, p2)
        assert p1.read_bytes() == p2.read_bytes()
