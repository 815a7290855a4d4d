"""Grid containers and bit-exact file formats.

The on-disk grid format (``.srgr``) is a fixed 64-byte little-endian header
followed by a row-major float32 payload:

    offset  size  field
    0       4     magic "SRGR"
    4       4     u32 version (1)
    8       8     u64 rows
    16      8     u64 cols
    24      8     u64 channels
    32      4     u32 element type code (0 = float32)
    36      4     u32 flags (bit 0: explicit nodata value present)
    40      4     f32 nodata value (valid when flag bit 0 set)
    44      20    zero padding

Values are stored row-major with channels interleaved per pixel, so a file
round-trip is the identity on (dims, channels, nodata, values) bit for bit.
Sensor metadata travels in a UTF-8 JSON manifest (see read_manifest).
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass

import numpy as np

from . import geo
from .errors import (
    DimensionOverflow,
    InconsistentTrajectory,
    MalformedHeader,
    MissingField,
    TruncatedPayload,
)

_MAGIC = b"SRGR"
_VERSION = 1
_HEADER_SIZE = 64
_ELEM_F32 = 0
_FLAG_NODATA = 1
_MAX_ELEMENTS = 1 << 33  # 8 Gi elements caps payloads at 32 GiB


class Raster:
    """2D grid with optional channels and a nodata sentinel.

    ``values`` is float32 with shape (rows, cols, channels); when ``nodata``
    is None, NaN is the reserved nodata marker.
    """

    def __init__(self, values, nodata=None):
        values = np.asarray(values, dtype=np.float32)
        if values.ndim == 2:
            values = values[:, :, None]
        if values.ndim != 3:
            raise ValueError("raster values must be 2D or 3D (rows, cols, channels)")
        self.values = values
        self.nodata = None if nodata is None else float(nodata)
        if self.nodata is not None and math.isnan(self.nodata):
            self.nodata = None  # NaN sentinel is the unset default

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    def plane(self, channel: int = 0) -> np.ndarray:
        """Single-channel 2D view."""
        return self.values[:, :, channel]

    def valid_mask(self, channel: int = 0) -> np.ndarray:
        v = self.plane(channel)
        if self.nodata is None:
            return ~np.isnan(v)
        return (v != np.float32(self.nodata)) & ~np.isnan(v)

    def is_nodata(self, values) -> np.ndarray:
        values = np.asarray(values)
        if self.nodata is None:
            return np.isnan(values)
        return (values == np.float32(self.nodata)) | np.isnan(values)

    def copy(self) -> "Raster":
        return Raster(self.values.copy(), nodata=self.nodata)


def write_raster(raster: Raster, path) -> None:
    """Write a Raster to ``path`` in the binary grid format (bit-exact)."""
    flags = 0
    nodata = 0.0
    if raster.nodata is not None:
        flags |= _FLAG_NODATA
        nodata = raster.nodata
    header = struct.pack(
        "<4sIQQQIIf20x",
        _MAGIC, _VERSION,
        raster.rows, raster.cols, raster.channels,
        _ELEM_F32, flags, nodata,
    )
    assert len(header) == _HEADER_SIZE
    payload = np.ascontiguousarray(raster.values, dtype="<f4")
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())
    os.replace(tmp, path)


def read_raster(path) -> Raster:
    """Read a Raster written by write_raster; validates header and payload."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER_SIZE)
        if len(header) < _HEADER_SIZE:
            raise MalformedHeader(f"{path}: header truncated at {len(header)} bytes")
        magic, version, rows, cols, channels, elem, flags, nodata = struct.unpack(
            "<4sIQQQIIf20x", header
        )
        if magic != _MAGIC:
            raise MalformedHeader(f"{path}: bad magic {magic!r}")
        if version != _VERSION:
            raise MalformedHeader(f"{path}: unsupported version {version}")
        if elem != _ELEM_F32:
            raise MalformedHeader(f"{path}: unsupported element type code {elem}")
        if rows < 1 or cols < 1 or channels < 1:
            raise MalformedHeader(f"{path}: non-positive dimensions {rows}x{cols}x{channels}")
        count = rows * cols * channels
        if count > _MAX_ELEMENTS:
            raise DimensionOverflow(f"{path}: {count} elements exceed the supported limit")
        payload = fh.read(count * 4)
        if len(payload) < count * 4:
            raise TruncatedPayload(
                f"{path}: payload holds {len(payload)} bytes, expected {count * 4}"
            )
    values = np.frombuffer(payload, dtype="<f4").reshape(rows, cols, channels)
    return Raster(values.copy(), nodata=nodata if flags & _FLAG_NODATA else None)


@dataclass
class GeoRaster:
    """Single-channel grid on an axis-aligned geodetic lattice.

    ``origin`` is the cell center of pixel (0, 0); spacings are radians per
    pixel with ``lat_spacing`` typically negative (north-up grids).
    """

    raster: Raster
    origin: geo.GeodeticCoord
    lat_spacing: float
    lon_spacing: float

    def __post_init__(self):
        if self.raster.channels != 1:
            raise ValueError("GeoRaster requires a single-channel raster")
        if self.lat_spacing == 0 or self.lon_spacing == 0:
            raise ValueError("GeoRaster spacings must be nonzero")

    @property
    def rows(self) -> int:
        return self.raster.rows

    @property
    def cols(self) -> int:
        return self.raster.cols

    def cell_center(self, row, col):
        """Geodetic (lat, lon) arrays of fractional grid positions."""
        lat = self.origin.latitude + np.asarray(row, dtype=np.float64) * self.lat_spacing
        lon = self.origin.longitude + np.asarray(col, dtype=np.float64) * self.lon_spacing
        return lat, lon

    def grid_position(self, lat, lon):
        """Fractional (row, col) of geodetic positions."""
        row = (np.asarray(lat, dtype=np.float64) - self.origin.latitude) / self.lat_spacing
        col = (np.asarray(lon, dtype=np.float64) - self.origin.longitude) / self.lon_spacing
        return row, col


def sample_bilinear_arrays(g: GeoRaster, lat, lon):
    """Vectorized bilinear sampling; NaN where outside or any neighbor nodata.

    Positions within 1e-6 pixel of the grid border count as inside, so cell
    centers survive the float round trip through geodetic coordinates.
    """
    row, col = g.grid_position(lat, lon)
    tol = 1e-6
    inside = (
        (row >= -tol) & (col >= -tol)
        & (row <= g.rows - 1 + tol) & (col <= g.cols - 1 + tol)
    )
    r0 = np.clip(np.floor(row).astype(np.int64), 0, max(g.rows - 2, 0))
    c0 = np.clip(np.floor(col).astype(np.int64), 0, max(g.cols - 2, 0))
    r1 = np.minimum(r0 + 1, g.rows - 1)
    c1 = np.minimum(c0 + 1, g.cols - 1)
    fr = np.clip(row - r0, 0.0, 1.0)
    fc = np.clip(col - c0, 0.0, 1.0)
    v = g.raster.plane().astype(np.float64)
    v00 = v[r0, c0]
    v01 = v[r0, c1]
    v10 = v[r1, c0]
    v11 = v[r1, c1]
    bad = (
        g.raster.is_nodata(v00) | g.raster.is_nodata(v01)
        | g.raster.is_nodata(v10) | g.raster.is_nodata(v11)
    )
    out = (
        v00 * (1 - fr) * (1 - fc)
        + v01 * (1 - fr) * fc
        + v10 * fr * (1 - fc)
        + v11 * fr * fc
    )
    return np.where(inside & ~bad, out, np.nan)


def sample_bilinear(g: GeoRaster, coord: geo.GeodeticCoord) -> float:
    """Bilinear sample at one geodetic position; NaN is the nodata answer."""
    return float(sample_bilinear_arrays(g, np.array([coord.latitude]), np.array([coord.longitude]))[0])


@dataclass
class SarImage:
    """Amplitude raster plus its acquisition metadata."""

    amplitude: Raster
    model: geo.SarSensorModel
    id: str = ""

    def __post_init__(self):
        if self.amplitude.channels != 1:
            raise ValueError("SAR amplitude must be single-channel")
        if (self.amplitude.rows, self.amplitude.cols) != (self.model.rows, self.model.cols):
            raise ValueError("amplitude dimensions disagree with the sensor model")
        valid = self.amplitude.plane()[self.amplitude.valid_mask()]
        if valid.size and float(valid.min()) < 0:
            raise ValueError("amplitudes must be non-negative")


# ---------------------------------------------------------------------------
# manifests

_REQUIRED_FIELDS = (
    "rows", "cols", "near_range_m", "range_spacing_m",
    "azimuth_start_time_s", "azimuth_time_spacing_s", "look_side",
    "ellipsoid", "trajectory",
)


def model_from_manifest_dict(doc: dict) -> geo.SarSensorModel:
    for field_name in _REQUIRED_FIELDS:
        if field_name not in doc:
            raise MissingField(field_name)
    ell_doc = doc["ellipsoid"]
    for sub in ("a_m", "f"):
        if sub not in ell_doc:
            raise MissingField(f"ellipsoid.{sub}")
    ellipsoid = geo.Ellipsoid(float(ell_doc["a_m"]), float(ell_doc["f"]))
    samples = doc["trajectory"]
    if not isinstance(samples, list) or len(samples) < 2:
        raise InconsistentTrajectory("trajectory needs at least 2 samples")
    times = []
    positions = []
    velocities = []
    for entry in samples:
        if "t_s" not in entry:
            raise MissingField("trajectory.t_s")
        if "pos_ecef_m" not in entry:
            raise MissingField("trajectory.pos_ecef_m")
        times.append(float(entry["t_s"]))
        positions.append([float(v) for v in entry["pos_ecef_m"]])
        if "vel_ecef_mps" in entry:
            velocities.append([float(v) for v in entry["vel_ecef_mps"]])
    times = np.array(times)
    if not np.all(np.diff(times) > 0):
        raise InconsistentTrajectory("trajectory sample times are not strictly increasing")
    vel = np.array(velocities) if len(velocities) == len(times) else None
    trajectory = geo.Trajectory.from_arrays(times, np.array(positions), vel)
    return geo.SarSensorModel(
        trajectory=trajectory,
        near_range=float(doc["near_range_m"]),
        range_spacing=float(doc["range_spacing_m"]),
        azimuth_start_time=float(doc["azimuth_start_time_s"]),
        azimuth_time_spacing=float(doc["azimuth_time_spacing_s"]),
        rows=int(doc["rows"]),
        cols=int(doc["cols"]),
        look_side=str(doc["look_side"]),
        reference_elevation=float(doc.get("reference_elevation_m", 0.0)),
        ellipsoid=ellipsoid,
    )


def read_manifest(path):
    """Parse a sensor manifest; returns (SarSensorModel, amplitude path or None).

    The amplitude reference is resolved relative to the manifest location.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    model = model_from_manifest_dict(doc)
    amplitude = doc.get("amplitude")
    if amplitude is not None and not os.path.isabs(amplitude):
        amplitude = os.path.join(os.path.dirname(os.path.abspath(path)), amplitude)
    return model, amplitude


def manifest_dict(model: geo.SarSensorModel, image_id: str = "", amplitude: str | None = None) -> dict:
    traj = model.trajectory
    doc = {
        "id": image_id,
        "rows": model.rows,
        "cols": model.cols,
        "near_range_m": model.near_range,
        "range_spacing_m": model.range_spacing,
        "azimuth_start_time_s": model.azimuth_start_time,
        "azimuth_time_spacing_s": model.azimuth_time_spacing,
        "look_side": model.look_side,
        "reference_elevation_m": model.reference_elevation,
        "ellipsoid": {"a_m": model.ellipsoid.semi_major_axis, "f": model.ellipsoid.flattening},
        "trajectory": [
            {
                "t_s": float(t),
                "pos_ecef_m": [float(v) for v in p],
                "vel_ecef_mps": [float(v) for v in w],
            }
            for t, p, w in zip(traj.times, traj.positions, traj.velocities)
        ],
    }
    if amplitude is not None:
        doc["amplitude"] = amplitude
    return doc


def write_manifest(model: geo.SarSensorModel, path, image_id: str = "",
                   amplitude: str | None = None) -> None:
    doc = manifest_dict(model, image_id=image_id, amplitude=amplitude)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_sar_image(manifest_path) -> SarImage:
    model, amplitude_path = read_manifest(manifest_path)
    if amplitude_path is None:
        raise MissingField("amplitude")
    amplitude = read_raster(amplitude_path)
    with open(manifest_path, "r", encoding="utf-8") as fh:
        image_id = json.load(fh).get("id", "")
    return SarImage(amplitude=amplitude, model=model, id=image_id)


def write_georaster(g: GeoRaster, manifest_path, grid_path=None) -> None:
    """Write a GeoRaster as {manifest json, .srgr grid} (degrees in the manifest)."""
    if grid_path is None:
        grid_path = os.path.splitext(manifest_path)[0] + ".srgr"
    write_raster(g.raster, grid_path)
    doc = {
        "origin_lat_deg": math.degrees(g.origin.latitude),
        "origin_lon_deg": math.degrees(g.origin.longitude),
        "lat_spacing_deg": math.degrees(g.lat_spacing),
        "lon_spacing_deg": math.degrees(g.lon_spacing),
        "grid": os.path.basename(grid_path),
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_georaster(manifest_path) -> GeoRaster:
    with open(manifest_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    for field_name in ("origin_lat_deg", "origin_lon_deg", "lat_spacing_deg", "lon_spacing_deg", "grid"):
        if field_name not in doc:
            raise MissingField(field_name)
    grid_path = doc["grid"]
    if not os.path.isabs(grid_path):
        grid_path = os.path.join(os.path.dirname(os.path.abspath(manifest_path)), grid_path)
    raster = read_raster(grid_path)
    return GeoRaster(
        raster=raster,
        origin=geo.GeodeticCoord.from_degrees(doc["origin_lat_deg"], doc["origin_lon_deg"]),
        lat_spacing=math.radians(doc["lat_spacing_deg"]),
        lon_spacing=math.radians(doc["lon_spacing_deg"]),
    )
