"""From flow fields to 3D points, fused elevation maps, and offset calibration.

``flow_to_points`` triangulates every sufficiently confident pixel of a
patch flow through the two sensor models; per-pixel failures are counted,
never raised.  ``fuse`` grids point clouds into a geodetic elevation raster
(per-cell median by default, lower-middle for even counts).  The calibration
step estimates the residual (east, north, up) translation between a fused
map and a reference surface by exhaustive horizontal search with quadratic
refinement, the up component being the mean difference at the best shift.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import geo
from .errors import EmptyFusion, InsufficientOverlap
from .poc import FlowGrid
from .raster import GeoRaster, Raster, sample_bilinear_arrays
from .tiling import PatchSpec

@dataclass
class ReconstructParams:
    confidence_min: float = 0.1
    residual_max: float = 5.0      # m
    cell_size: float = 2.0         # m
    aggregator: str = "median"
    pixel_stride: int = 1

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")
        if self.aggregator not in ("median", "mean"):
            raise ValueError("aggregator must be 'median' or 'mean'")
        if self.pixel_stride < 1:
            raise ValueError("pixel_stride must be >= 1")

@dataclass
class PointCloud:
    """Triangulated points, structure-of-arrays."""

    xyz: np.ndarray          # (N, 3) ECEF, float64
    latitude: np.ndarray     # (N,) radians
    longitude: np.ndarray    # (N,) radians
    height: np.ndarray       # (N,) meters
    confidence: np.ndarray   # (N,) [0, 1]
    residual: np.ndarray     # (N,) meters, >= 0
    ref_pixel: np.ndarray    # (N, 2) reference-image (row, col)

    def __len__(self):
        return self.xyz.shape[0]

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(
            xyz=np.zeros((0, 3)), latitude=np.zeros(0), longitude=np.zeros(0),
            height=np.zeros(0), confidence=np.zeros(0), residual=np.zeros(0),
            ref_pixel=np.zeros((0, 2)),
        )

    def to_ascii(self, path) -> None:
        """Write 'lat lon height confidence residual' lines (degrees, meters)."""
        lat = np.degrees(self.latitude)
        lon = np.degrees(self.longitude)
        with open(path, "w", encoding="utf-8") as fh:
            for i in range(len(self)):
                fh.write(
                    f"{lat[i]:.9f} {lon[i]:.9f} {self.height[i]:.4f} "
                    f"{self.confidence[i]:.4f} {self.residual[i]:.6f}\n"
                )

    @classmethod
    def from_ascii(cls, path) -> "PointCloud":
        data = np.loadtxt(path, ndmin=2)
        if data.size == 0:
            return cls.empty()
        lat = np.radians(data[:, 0])
        lon = np.radians(data[:, 1])
        h = data[:, 2]
        x, y, z = geo.geodetic_to_ecef_arrays(lat, lon, h)
        return cls(
            xyz=np.stack([x, y, z], axis=-1), latitude=lat, longitude=lon, height=h,
            confidence=data[:, 3], residual=data[:, 4],
            ref_pixel=np.full((data.shape[0], 2), np.nan),
        )

    def save_npz(self, path) -> None:
        np.savez(
            path, xyz=self.xyz, latitude=self.latitude, longitude=self.longitude,
            height=self.height, confidence=self.confidence, residual=self.residual,
            ref_pixel=self.ref_pixel,
        )

    @classmethod
    def load_npz(cls, path) -> "PointCloud":
        with np.load(path) as data:
            return cls(**{k: data[k] for k in data.files})

@dataclass
class FlowPointReport:
    """Accounting of where pixels went: kept + dropped (by cause) = seen."""

    pixels_seen: int = 0
    below_confidence: int = 0       # includes unmatched (confidence 0) pixels
    triangulation_failed: int = 0
    residual_exceeded: int = 0
    kept: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)

    @property
    def balanced(self) -> bool:
        dropped = (
            self.below_confidence + self.triangulation_failed + self.residual_exceeded
        )
        return self.pixels_seen == dropped + self.kept

def flow_to_points(flow: FlowGrid, spec: PatchSpec, src_origin,
                   ref_model: geo.SarSensorModel, src_model: geo.SarSensorModel,
                   params: ReconstructParams = ReconstructParams(),
                   chunk: int = 500_000):
    """Triangulate one patch flow; returns (PointCloud, FlowPointReport)."""
    report = FlowPointReport()
    rows, cols = flow.rows, flow.cols
    stride = params.pixel_stride
    rr, cc = np.meshgrid(
        np.arange(0, rows, stride), np.arange(0, cols, stride), indexing="ij"
    )
    rr = rr.ravel()
    cc = cc.ravel()
    report.pixels_seen = rr.size

    conf = flow.confidence[rr, cc].astype(np.float64)
    disp = flow.displacement[rr, cc].astype(np.float64)
    confident = (conf > 0) & (conf >= params.confidence_min)
    report.below_confidence = int(np.count_nonzero(~confident))
    finite = np.isfinite(disp).all(axis=-1)
    report.triangulation_failed += int(np.count_nonzero(confident & ~finite))
    use = confident & finite

    rr, cc, conf, disp = rr[use], cc[use], conf[use], disp[use]
    ref_rows = spec.ref_origin[0] + rr.astype(np.float64)
    ref_cols = spec.ref_origin[1] + cc.astype(np.float64)
    src_rows = src_origin[0] + rr + disp[:, 0]
    src_cols = src_origin[1] + cc + disp[:, 1]

    keep_parts = []
    n = rr.size
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        xyz, residual, status = geo.triangulate_arrays(
            ref_model, ref_rows[sl], ref_cols[sl], src_model, src_rows[sl], src_cols[sl]
        )
        ok = status == geo.ST_OK
        report.triangulation_failed += int(np.count_nonzero(~ok))
        good = ok & (residual <= params.residual_max)
        report.residual_exceeded += int(np.count_nonzero(ok & (residual > params.residual_max)))
        if np.any(good):
            keep_parts.append((
                xyz[good], residual[good], conf[sl][good],
                ref_rows[sl][good], ref_cols[sl][good],
            ))

    if not keep_parts:
        return PointCloud.empty(), report

    xyz = np.concatenate([p[0] for p in keep_parts])
    residual = np.concatenate([p[1] for p in keep_parts])
    confk = np.concatenate([p[2] for p in keep_parts])
    prow = np.concatenate([p[3] for p in keep_parts])
    pcol = np.concatenate([p[4] for p in keep_parts])
    lat, lon, height, _ = geo.ecef_to_geodetic_arrays(
        xyz[:, 0], xyz[:, 1], xyz[:, 2], ref_model.ellipsoid
    )
    report.kept = xyz.shape[0]
    cloud = PointCloud(
        xyz=xyz, latitude=lat, longitude=lon, height=height,
        confidence=confk, residual=residual,
        ref_pixel=np.stack([prow, pcol], axis=-1),
    )
    return cloud, report

@dataclass
class ElevationMap:
    elevation: GeoRaster
    support: Raster  # points per cell, same grid

    def valid_mask(self) -> np.ndarray:
        return self.support.plane() > 0

    def save(self, manifest_path) -> None:
        from .raster import write_georaster, write_raster
        write_georaster(self.elevation, manifest_path)
        support_path = os.path.splitext(str(manifest_path))[0] + ".support.srgr"
        write_raster(self.support, support_path)

    @classmethod
    def load(cls, manifest_path) -> "ElevationMap":
        from .raster import read_georaster, read_raster
        elevation = read_georaster(manifest_path)
        support_path = os.path.splitext(str(manifest_path))[0] + ".support.srgr"
        support = read_raster(support_path)
        return cls(elevation=elevation, support=support)

def _lower_middle_median(sorted_values: np.ndarray, starts: np.ndarray,
                         counts: np.ndarray) -> np.ndarray:
    """Per-group median with the lower-middle convention for even counts."""
    return sorted_values[starts + (counts - 1) // 2]

def fuse(clouds, params: ReconstructParams = ReconstructParams(),
         ellipsoid: geo.Ellipsoid = geo.WGS84) -> ElevationMap:
    """Grid point clouds into a north-up elevation map at ``cell_size``.

    The angular cell size is fixed from the mean scene latitude; points are
    assigned to the nearest cell center, the per-cell aggregate is the
    configured statistic, and the support grid counts contributing points.
    Deterministic given input order (ties in the median use lower-middle).
    """
    clouds = list(clouds)
    if not clouds:
        raise EmptyFusion("no point clouds supplied")
    lat = np.concatenate([c.latitude for c in clouds])
    lon = np.concatenate([c.longitude for c in clouds])
    height = np.concatenate([c.height for c in clouds])
    if lat.size == 0:
        raise EmptyFusion("no points to fuse")

    lat0 = float(lat.mean())
    dlon, dlat = geo.meters_to_angles(lat0, params.cell_size, params.cell_size, ellipsoid)
    origin_lat = float(lat.max())
    origin_lon = float(lon.min())
    rows_idx = np.rint((origin_lat - lat) / dlat).astype(np.int64)
    cols_idx = np.rint((lon - origin_lon) / dlon).astype(np.int64)
    n_rows = int(rows_idx.max()) + 1
    n_cols = int(cols_idx.max()) + 1

    flat = rows_idx * n_cols + cols_idx
    order = np.lexsort((height, flat))
    flat_sorted = flat[order]
    height_sorted = height[order]
    cells, starts, counts = np.unique(flat_sorted, return_index=True, return_counts=True)
    if params.aggregator == "median":
        values = _lower_middle_median(height_sorted, starts, counts)
    else:
        values = np.add.reduceat(height_sorted, starts) / counts

    grid = np.full(n_rows * n_cols, np.nan, dtype=np.float32)
    support = np.zeros(n_rows * n_cols, dtype=np.float32)
    grid[cells] = values.astype(np.float32)
    support[cells] = counts.astype(np.float32)

    elevation = GeoRaster(
        raster=Raster(grid.reshape(n_rows, n_cols)),
        origin=geo.GeodeticCoord(origin_lat, origin_lon),
        lat_spacing=-dlat,
        lon_spacing=dlon,
    )
    return ElevationMap(elevation=elevation, support=Raster(support.reshape(n_rows, n_cols)))

def map_points(emap: ElevationMap) -> PointCloud:
    """Cell centers of a map as a point cloud (used for re-fusion checks)."""
    valid = emap.valid_mask()
    rows, cols = np.nonzero(valid)
    lat, lon = emap.elevation.cell_center(rows, cols)
    h = emap.elevation.raster.plane()[rows, cols].astype(np.float64)
    x, y, z = geo.geodetic_to_ecef_arrays(lat, lon, h)
    n = rows.size
    return PointCloud(
        xyz=np.stack([x, y, z], axis=-1), latitude=lat, longitude=lon, height=h,
        confidence=np.ones(n), residual=np.zeros(n),
        ref_pixel=np.full((n, 2), np.nan),
    )

def calibrate_offsets(emap: ElevationMap, reference: GeoRaster,
                      search_m: float = 20.0, step_m: float = 1.0,
                      min_overlap: int = 100, max_cells: int = 20_000):
    """Estimate the (east, north, up) translation of the map vs the reference.

    Exhaustive search over horizontal shifts in [-search, +search] at
    ``step_m`` minimizing the variance of (map - reference) over co-located
    valid cells, then per-axis quadratic refinement; the up offset is the
    mean difference at the refined shift.  Returns (d_east, d_north, d_up)
    in meters: the map content is displaced by this much relative to the
    reference, so apply_calibration subtracts it.
    """
    valid = emap.valid_mask()
    rows, cols = np.nonzero(valid)
    if rows.size > max_cells:
        sel = np.linspace(0, rows.size - 1, max_cells).astype(np.int64)
        rows, cols = rows[sel], cols[sel]
    if rows.size < min_overlap:
        raise InsufficientOverlap(f"only {rows.size} valid map cells")
    lat, lon = emap.elevation.cell_center(rows, cols)
    values = emap.elevation.raster.plane()[rows, cols].astype(np.float64)
    lat0 = float(lat.mean())

    shifts = np.arange(-search_m, search_m + step_m / 2, step_m)
    n_s = len(shifts)
    de_all = np.repeat(shifts, n_s)
    dn_all = np.tile(shifts, n_s)

    def evaluate(de, dn):
        """Variance/mean of (map - reference) per shift, vectorized."""
        dlon, dlat = geo.meters_to_angles(lat0, de, dn)
        lat_q = lat[None, :] - np.asarray(dlat)[:, None]
        lon_q = lon[None, :] - np.asarray(dlon)[:, None]
        ref = sample_bilinear_arrays(reference, lat_q, lon_q)
        valid_cells = ~np.isnan(ref)
        count = valid_cells.sum(axis=1)
        enough = count >= min_overlap
        diff = np.where(valid_cells, values[None, :] - ref, 0.0)
        denom = np.maximum(count, 1)
        mean = diff.sum(axis=1) / denom
        var = (diff * diff).sum(axis=1) / denom - mean * mean
        return (
            np.where(enough, var, np.inf),
            np.where(enough, mean, np.nan),
            count,
        )

    cost = np.full(n_s * n_s, np.inf)
    means = np.full(n_s * n_s, np.nan)
    chunk = max(1, 2_000_000 // max(rows.size, 1))
    for start in range(0, n_s * n_s, chunk):
        sl = slice(start, min(start + chunk, n_s * n_s))
        cost[sl], means[sl], _ = evaluate(de_all[sl], dn_all[sl])
    if not np.isfinite(cost.min()):
        raise InsufficientOverlap("no horizontal shift produced enough overlap")
    cost_grid = cost.reshape(n_s, n_s)

    i = int(np.argmin(cost_grid) // n_s)
    j = int(np.argmin(cost_grid) % n_s)

    def refine(idx, axis_costs):
        if 0 < idx < n_s - 1:
            y0, y1, y2 = axis_costs[idx - 1], axis_costs[idx], axis_costs[idx + 1]
            denom = y0 - 2 * y1 + y2
            if np.isfinite([y0, y1, y2]).all() and abs(denom) > 1e-30:
                return shifts[idx] + 0.5 * (y0 - y2) / denom * step_m
        return shifts[idx]

    de = refine(i, cost_grid[:, j])
    dn = refine(j, cost_grid[i, :])
    var, mean, count = evaluate(np.array([de]), np.array([dn]))
    if count[0] < min_overlap:
        raise InsufficientOverlap(f"only {count[0]} co-located cells at the best shift")
    return float(de), float(dn), float(mean[0])

def apply_calibration(emap: ElevationMap, offsets) -> ElevationMap:
    """Remove a calibrated (east, north, up) offset from the map."""
    de, dn, du = offsets
    lat0 = emap.elevation.origin.latitude
    dlon, dlat = geo.meters_to_angles(lat0, de, dn)
    shifted = GeoRaster(
        raster=Raster(emap.elevation.raster.plane() - np.float32(du)),
        origin=geo.GeodeticCoord(
            emap.elevation.origin.latitude - dlat,
            emap.elevation.origin.longitude - dlon,
        ),
        lat_spacing=emap.elevation.lat_spacing,
        lon_spacing=emap.elevation.lon_spacing,
    )
    return ElevationMap(elevation=shifted, support=emap.support.copy())
