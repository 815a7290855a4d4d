"""Quantitative machinery: training losses, elevation-error statistics,
threshold curves, and error-map rendering.

The disparity loss is the confidence-masked mean L2 norm normalized by the
FULL pixel count (not the mask count); a support-normalized variant sits
behind ``normalize_by_support`` for comparison.  The confidence loss is
binary cross-entropy; the printed, un-negated form is available via
``bce_sign='as-printed'`` but the default negates it so the loss is bounded
below and minimized at a perfect prediction.  Error statistics use the
signed convention measured - truth and population standard deviation.
"""

from __future__ import annotations

import csv
import io
import json

from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw

from .errors import DimensionMismatch, NoOverlap
from .raster import GeoRaster, sample_bilinear_arrays
from .reconstruct import ElevationMap

_EPS = 1e-7

BCE_STANDARD = "standard-negated"
BCE_AS_PRINTED = "as-printed"

@dataclass(frozen=True)
class LossConfig:
    weight: float = 0.01                 # confidence-loss weight in the total
    bce_sign: str = BCE_STANDARD
    normalize_by_support: bool = False   # divide by #valid instead of #pixels

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("weight must be non-negative")
        if self.bce_sign not in (BCE_STANDARD, BCE_AS_PRINTED):
            raise ValueError(f"unknown bce_sign {self.bce_sign!r}")

def _as_plane(a, channels):
    v = np.asarray(getattr(a, "values", a), dtype=np.float64)
    if channels == 1 and v.ndim == 3 and v.shape[2] == 1:
        v = v[:, :, 0]
    want = 2 if channels == 1 else 3
    if v.ndim != want or (channels > 1 and v.shape[2] != channels):
        raise DimensionMismatch(f"expected {channels}-channel grid, got shape {v.shape}")
    return v

def loss_disparity(d_hat, d, c, cfg: LossConfig = LossConfig()) -> float:
    """Mean confidence-masked L2 disparity error, (1/|I|) sum C_i ||D^_i - D_i||."""
    d_hat = _as_plane(d_hat, 2)
    d = _as_plane(d, 2)
    c = _as_plane(c, 1)
    if d_hat.shape != d.shape or c.shape != d.shape[:2]:
        raise DimensionMismatch(
            f"grid shapes disagree: {d_hat.shape} vs {d.shape} vs {c.shape}"
        )
    mask = c > 0
    diff = d_hat - d
    norms = np.sqrt(np.sum(np.where(mask[:, :, None], diff, 0.0) ** 2, axis=-1))
    denom = int(np.count_nonzero(mask)) if cfg.normalize_by_support else c.size
    if denom == 0:
        return 0.0
    return float(norms[mask].sum() / denom)

def loss_confidence(c_hat, c, cfg: LossConfig = LossConfig()) -> float:
    """Binary cross-entropy between predicted and truth confidence maps."""
    c_hat = _as_plane(c_hat, 1)
    c = _as_plane(c, 1)
    if c_hat.shape != c.shape:
        raise DimensionMismatch(f"grid shapes disagree: {c_hat.shape} vs {c.shape}")
    p = np.clip(c_hat, _EPS, 1.0 - _EPS)
    terms = c * np.log(p) + (1.0 - c) * np.log(1.0 - p)
    denom = int(np.count_nonzero(c > 0)) if cfg.normalize_by_support else c.size
    if denom == 0:
        return 0.0
    total = float(terms.sum() / denom)
    return -total if cfg.bce_sign == BCE_STANDARD else total

def loss_total(ld: float, lc: float, cfg: LossConfig = LossConfig()) -> float:
    return float(ld + cfg.weight * lc)

# ---------------------------------------------------------------------------
# elevation-error statistics

@dataclass
class ErrorStats:
    mean_error: float            # m, signed (measured - truth)
    std_error: float             # m, population
    pct_within: dict             # threshold m -> percentage of cells
    n_cells: int
    coverage: float              # measured cells / truth cells on the grid

    def as_dict(self) -> dict:
        return {
            "mean_error_m": self.mean_error,
            "std_error_m": self.std_error,
            "pct_within": {f"{k:g}": v for k, v in sorted(self.pct_within.items())},
            "n_cells": self.n_cells,
            "coverage": self.coverage,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self, label: str = "elevation") -> str:
        """Aligned text table: mean +/- std and the percentage at each threshold."""
        taus = sorted(self.pct_within)
        header = ["dataset", "mean [m]", "std [m]"] + [f"<={t:g} m [%]" for t in taus] + ["coverage"]
        row = (
            [label, f"{self.mean_error:.2f}", f"{self.std_error:.2f}"]
            + [f"{self.pct_within[t]:.2f}" for t in taus]
            + [f"{100.0 * self.coverage:.1f}%"]
        )
        widths = [max(len(h), len(r)) for h, r in zip(header, row)]
        fmt = "  ".join(f"{{:>{w}}}" for w in widths)
        return fmt.format(*header) + "\n" + fmt.format(*row) + "\n"

    def to_curve_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["threshold_m", "pct_within"])
        for tau in sorted(self.pct_within):
            writer.writerow([f"{tau:g}", f"{self.pct_within[tau]:.6f}"])
        return buf.getvalue()

def _cell_errors(emap: ElevationMap, truth: GeoRaster):
    """Signed per-cell error (measured - truth) on the map grid; NaN where either is missing."""
    rows, cols = emap.elevation.rows, emap.elevation.cols
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    lat, lon = emap.elevation.cell_center(rr.ravel(), cc.ravel())
    truth_vals = sample_bilinear_arrays(truth, lat, lon).reshape(rows, cols)
    measured = np.where(emap.valid_mask(), emap.elevation.raster.plane(), np.nan)
    return measured.astype(np.float64) - truth_vals, truth_vals

def error_stats(emap: ElevationMap, truth: GeoRaster, thresholds=(0.5, 1.0, 2.0, 4.0, 8.0)) -> ErrorStats:
    """Mean/std/threshold percentages of map-vs-truth elevation differences.

    Cells are co-located on the map grid (truth sampled bilinearly at the
    map cell centers).  Coverage is the fraction of truth-valid grid cells
    that carry a measurement.
    """
    errors, truth_vals = _cell_errors(emap, truth)
    both = ~np.isnan(errors)
    n = int(both.sum())
    if n == 0:
        raise NoOverlap("measured map and truth share no valid cells")
    e = errors[both]
    truth_cells = int((~np.isnan(truth_vals)).sum())
    pct = {
        float(tau): float(100.0 * np.count_nonzero(np.abs(e) <= tau) / n)
        for tau in thresholds
    }
    return ErrorStats(
        mean_error=float(e.mean()),
        std_error=float(e.std()),
        pct_within=pct,
        n_cells=n,
        coverage=float(n / truth_cells) if truth_cells else 0.0,
    )

# ---------------------------------------------------------------------------
# error-map rendering

_GRAY = (128, 128, 128)

def _diverging_color(t: np.ndarray) -> np.ndarray:
    """t in [-1, 1] -> blue-white-red, vectorized to (..., 3) uint8."""
    t = np.clip(t, -1.0, 1.0)
    r = np.where(t >= 0, 255.0, 255.0 * (1.0 + t))
    g = 255.0 * (1.0 - np.abs(t))
    b = np.where(t <= 0, 255.0, 255.0 * (1.0 - t))
    return np.stack([r, g, b], axis=-1).astype(np.uint8)

def render_error_map(emap: ElevationMap, truth: GeoRaster, path,
                     vmax: float = 5.0) -> None:
    """Write a deterministic PNG of signed errors with an embedded legend.

    Errors map onto a blue-white-red scale saturating at +/- vmax; cells
    without a measurement are gray.  Output bytes depend only on the inputs.
    """
    errors, _ = _cell_errors(emap, truth)
    valid = ~np.isnan(errors)
    if not valid.any():
        raise NoOverlap("nothing to render: no co-located valid cells")
    rgb = np.empty(errors.shape + (3,), dtype=np.uint8)
    rgb[:] = _GRAY
    colored = _diverging_color(np.where(valid, errors, 0.0) / vmax)
    rgb[valid] = colored[valid]

    rows, cols = errors.shape
    legend_w = 46
    canvas = Image.new("RGB", (cols + legend_w, max(rows, 64)), _GRAY)
    canvas.paste(Image.fromarray(rgb), (0, 0))

    bar_h = max(rows, 64) - 20
    t = np.linspace(1.0, -1.0, bar_h)
    bar = np.repeat(_diverging_color(t)[:, None, :], 12, axis=1)
    canvas.paste(Image.fromarray(bar), (cols + 6, 10))
    draw = ImageDraw.Draw(canvas)
    draw.text((cols + 20, 6), f"+{vmax:g}m", fill=(0, 0, 0))
    draw.text((cols + 20, max(rows, 64) // 2 - 6), "0", fill=(0, 0, 0))
    draw.text((cols + 20, max(rows, 64) - 16), f"-{vmax:g}m", fill=(0, 0, 0))
    canvas.save(path, format="PNG", optimize=False)
