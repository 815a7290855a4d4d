"""Synthetic scenes: DSMs, straight-line flight tracks, and rendered image pairs.

The renderer splats a textured ground surface through the exact projection
models into both slant-range grids, which makes every downstream quantity
(ground-truth flow, triangulated elevations, fused maps) verifiable against
the surface that generated the images.

Two stereo layouts are supported by the factory:

* ``opposite`` (default): equal-incidence tracks on opposite sides of the
  scene.  Both images sample the ground at the same scale with mirrored
  range axes, which block matching can handle by index flipping, and the
  line-of-sight intersection angle is twice the incidence angle.
* ``same``: both tracks on one side with different incidence angles.  This
  is the classic geometry for studying range-perturbation sensitivity, but
  the two images see the ground at different scales.

Rendering is geometric splatting of a textured surface; the optional noise
is multiplicative exponential speckle.  No radiometry is simulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geo
from .errors import FootprintMiss
from .raster import GeoRaster, Raster, SarImage


@dataclass(frozen=True)
class TrackSpec:
    """Straight-line flight: constant heading, speed and altitude."""

    altitude: float          # m above the ellipsoid at the scene center
    speed: float             # m/s
    cross_offset: float      # m east of the scene center (heading is north)
    look_side: str           # 'left' or 'right'
    heading_deg: float = 0.0  # only north heading is exercised by the factory


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for one synthetic stereo acquisition."""

    extent: tuple = (2000.0, 2000.0)   # (north, east) meters
    dsm_kind: str = "gaussian-hills"
    dsm_params: dict = field(default_factory=dict)
    texture_seed: int = 7
    track_a: TrackSpec = None
    track_b: TrackSpec = None
    intersection_angle: float = 43.0   # degrees between the lines of sight
    azimuth_spacing: float = 1.0       # m/line
    range_spacing: float = 0.7         # m/pixel
    dsm_spacing: float = 0.5           # m/cell
    origin_lat_deg: float = 36.2
    origin_lon_deg: float = 139.4
    speckle_looks: int = 0             # 0 = noiseless
    azimuth_margin: float = 100.0      # m imaged beyond the extent
    range_margin: float = 150.0        # m of slant range padding

    def __post_init__(self):
        if not (5.0 < self.intersection_angle < 90.0):
            raise ValueError("intersection angle must lie in (5, 90) degrees")
        if self.track_a is None or self.track_b is None:
            raise ValueError("scene needs two tracks (use standard_scene)")


_DEFAULT_HILLS = {
    "base": 120.0,
    "hills": [
        {"amplitude": 18.0, "sigma": 650.0, "center": (-0.18, -0.22)},
        {"amplitude": 14.0, "sigma": 500.0, "center": (0.25, 0.15)},
        {"amplitude": 10.0, "sigma": 800.0, "center": (0.05, 0.35)},
    ],
}


def standard_scene(intersection_angle: float = 43.0, geometry: str = "opposite",
                   extent: tuple = (2000.0, 2000.0), altitude: float = 300_000.0,
                   speed: float = 7000.0, ref_incidence: float = 70.0,
                   dsm_kind: str = "gaussian-hills", dsm_params: dict | None = None,
                   texture_seed: int = 7, speckle_looks: int = 0,
                   azimuth_spacing: float = 1.0, range_spacing: float = 0.7,
                   dsm_spacing: float = 0.5) -> SceneSpec:
    """Build a SceneSpec whose tracks realize the requested intersection angle.

    ``opposite``: incidence = angle/2 on both sides (mirrored range axes).
    ``same``: the reference track flies at ``ref_incidence`` and the source
    at ``ref_incidence - intersection_angle``, both west of the scene.

    The default platform is a high straight track: the incidence spread
    across the swath scales as extent/altitude, and block matching needs the
    two images' ground scales (ratio exp(~2 cot(i) cos^2(i) extent / alt))
    to stay within a percent over the whole extent.  Low-altitude tracks
    render fine but only correlate near the center line.
    """
    if geometry == "opposite":
        incidence = math.radians(intersection_angle / 2.0)
        d = altitude * math.tan(incidence)
        track_a = TrackSpec(altitude=altitude, speed=speed, cross_offset=-d, look_side="right")
        track_b = TrackSpec(altitude=altitude, speed=speed, cross_offset=+d, look_side="left")
    elif geometry == "same":
        inc_a = math.radians(ref_incidence)
        inc_b = math.radians(ref_incidence - intersection_angle)
        if not 0 < inc_b < math.pi / 2:
            raise ValueError("same-side geometry needs ref_incidence > intersection angle")
        track_a = TrackSpec(altitude=altitude, speed=speed,
                            cross_offset=-altitude * math.tan(inc_a), look_side="right")
        track_b = TrackSpec(altitude=altitude, speed=speed,
                            cross_offset=-altitude * math.tan(inc_b), look_side="right")
    else:
        raise ValueError(f"unknown geometry {geometry!r}")
    if dsm_params is None:
        dsm_params = dict(_DEFAULT_HILLS) if dsm_kind == "gaussian-hills" else {}
    return SceneSpec(
        extent=extent, dsm_kind=dsm_kind, dsm_params=dsm_params,
        texture_seed=texture_seed, track_a=track_a, track_b=track_b,
        intersection_angle=intersection_angle, azimuth_spacing=azimuth_spacing,
        range_spacing=range_spacing, dsm_spacing=dsm_spacing,
        speckle_looks=speckle_looks,
    )


def _scene_origin(spec: SceneSpec) -> geo.GeodeticCoord:
    return geo.GeodeticCoord.from_degrees(spec.origin_lat_deg, spec.origin_lon_deg, 0.0)


def _grid_axes(spec: SceneSpec):
    """ENU north/east coordinates of the DSM cell centers (north-up grid)."""
    n_half = spec.extent[0] / 2.0
    e_half = spec.extent[1] / 2.0
    north = np.arange(n_half, -n_half - spec.dsm_spacing / 2, -spec.dsm_spacing)
    east = np.arange(-e_half, e_half + spec.dsm_spacing / 2, spec.dsm_spacing)
    return north, east


def _surface_heights(spec: SceneSpec, north, east) -> np.ndarray:
    e_grid, n_grid = np.meshgrid(east, north)
    kind = spec.dsm_kind
    params = spec.dsm_params
    if kind == "flat":
        return np.full(n_grid.shape, float(params.get("height", 100.0)))
    if kind == "ramp":
        start = float(params.get("start", 0.0))
        end = float(params.get("end", 50.0))
        axis = params.get("axis", "east")
        coord = e_grid if axis == "east" else n_grid
        lo, hi = coord.min(), coord.max()
        return start + (end - start) * (coord - lo) / (hi - lo)
    if kind == "gaussian-hills":
        base = float(params.get("base", 100.0))
        h = np.full(n_grid.shape, base)
        extent_n, extent_e = spec.extent
        for hill in params.get("hills", _DEFAULT_HILLS["hills"]):
            cx = float(hill["center"][0]) * extent_e
            cy = float(hill["center"][1]) * extent_n
            sig = float(hill["sigma"])
            h += float(hill["amplitude"]) * np.exp(
                -((e_grid - cx) ** 2 + (n_grid - cy) ** 2) / (2.0 * sig * sig)
            )
        return h
    raise ValueError(f"unknown dsm kind {kind!r}")


def make_dsm(spec: SceneSpec) -> GeoRaster:
    """Deterministic surface model for the scene on a north-up geodetic grid."""
    origin = _scene_origin(spec)
    north, east = _grid_axes(spec)
    heights = _surface_heights(spec, north, east).astype(np.float32)
    dlon, dlat = geo.meters_to_angles(origin.latitude, spec.dsm_spacing, spec.dsm_spacing)
    nw_lon, nw_lat = geo.meters_to_angles(origin.latitude, east[0], north[0])
    return GeoRaster(
        raster=Raster(heights),
        origin=geo.GeodeticCoord(origin.latitude + nw_lat, origin.longitude + nw_lon),
        lat_spacing=-dlat,
        lon_spacing=dlon,
    )


def _dsm_enu_points(spec: SceneSpec, dsm: GeoRaster):
    """ECEF coordinates of every DSM cell center at its surface height."""
    origin = _scene_origin(spec)
    o, e_hat, n_hat, u_hat = geo.enu_basis(origin)
    north, east = _grid_axes(spec)
    lat_r, lon_r = dsm.cell_center(np.arange(dsm.rows), np.zeros(dsm.rows))
    lat_c, lon_c = dsm.cell_center(np.zeros(dsm.cols), np.arange(dsm.cols))
    lat = np.broadcast_to(lat_r[:, None], (dsm.rows, dsm.cols))
    lon = np.broadcast_to(lon_c[None, :], (dsm.rows, dsm.cols))
    h = dsm.raster.plane().astype(np.float64)
    x, y, z = geo.geodetic_to_ecef_arrays(lat, lon, h)
    return np.stack([x, y, z], axis=-1), north, east


def _track_trajectory(spec: SceneSpec, track: TrackSpec, duration: float):
    origin = _scene_origin(spec)
    o, e_hat, n_hat, u_hat = geo.enu_basis(origin)
    y_start = -(spec.extent[0] / 2.0 + spec.azimuth_margin)
    t_pad = 0.15 * duration + 200.0 / track.speed
    n_samples = 12
    times = np.linspace(-t_pad, duration + t_pad, n_samples)
    pos = (
        o[None, :]
        + e_hat[None, :] * track.cross_offset
        + n_hat[None, :] * (y_start + track.speed * times)[:, None]
        + u_hat[None, :] * track.altitude
    )
    return geo.Trajectory.from_arrays(times, pos)


def scene_models(spec: SceneSpec, dsm: GeoRaster | None = None):
    """Sensor models for both tracks, sized so the whole extent is imaged."""
    if dsm is None:
        dsm = make_dsm(spec)
    h = dsm.raster.plane()
    h_min, h_max = float(h.min()), float(h.max())
    h_ref = round(float(h.mean()), 1)

    rows = int(math.ceil((spec.extent[0] + 2 * spec.azimuth_margin) / spec.azimuth_spacing)) + 1
    duration = (rows - 1) * spec.azimuth_spacing / spec.track_a.speed

    models = []
    for track in (spec.track_a, spec.track_b):
        e_half = spec.extent[1] / 2.0
        d_near = abs(track.cross_offset) - e_half
        d_far = abs(track.cross_offset) + e_half
        if d_near <= 0:
            raise FootprintMiss("track crosses the scene; side-looking geometry required")
        r_min = math.hypot(d_near, track.altitude - h_max)
        r_max = math.hypot(d_far, track.altitude - h_min)
        near_range = r_min - spec.range_margin
        cols = int(math.ceil((r_max + spec.range_margin - near_range) / spec.range_spacing)) + 1
        trajectory = _track_trajectory(spec, track, duration)
        models.append(
            geo.SarSensorModel(
                trajectory=trajectory,
                near_range=near_range,
                range_spacing=spec.range_spacing,
                azimuth_start_time=0.0,
                azimuth_time_spacing=spec.azimuth_spacing / track.speed,
                rows=rows,
                cols=cols,
                look_side=track.look_side,
                reference_elevation=h_ref,
            )
        )
    return models[0], models[1]


# ---------------------------------------------------------------------------
# textures


def _box_blur(a: np.ndarray, radius: int, passes: int = 2) -> np.ndarray:
    """Separable box blur; repeated passes approximate a smooth kernel."""
    out = a.astype(np.float32)
    size = 2 * radius + 1
    for _ in range(passes):
        for axis in (0, 1):
            pad = [(0, 0), (0, 0)]
            pad[axis] = (radius, radius)
            padded = np.pad(out, pad, mode="reflect")
            c = np.cumsum(padded, axis=axis, dtype=np.float64)
            lead = [slice(None)] * 2
            lag = [slice(None)] * 2
            lead[axis] = slice(size, None)
            lag[axis] = slice(None, -size)
            first = [slice(None)] * 2
            first[axis] = slice(size - 1, size)
            out = (
                np.concatenate([c[tuple(first)], c[tuple(lead)] - c[tuple(lag)]], axis=axis)
                / size
            ).astype(np.float32)
    return out


def ground_texture(shape, seed: int, contrast: float = 0.35) -> np.ndarray:
    """Smooth positive reflectivity field, mean 1, deterministic per seed."""
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(shape).astype(np.float32)
    smooth = _box_blur(noise, radius=2, passes=2)
    smooth /= max(float(smooth.std()), 1e-9)
    return np.clip(1.0 + contrast * smooth, 0.05, None).astype(np.float32)


def speckle_block(rows: int, cols: int, seed: int, band: float = 0.45) -> np.ndarray:
    """Band-limited speckle amplitude patch, synthesized in the Fourier domain.

    Being strictly band limited makes ``fourier_shift`` an exact translation
    operator on these patches, so they serve as sub-pixel shift oracles.
    """
    rng = np.random.default_rng(seed)
    spectrum = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    fr = np.fft.fftfreq(rows)[:, None]
    fc = np.fft.fftfreq(cols)[None, :]
    mask = (np.abs(fr) <= band / 2) & (np.abs(fc) <= band / 2)
    field = np.fft.ifft2(spectrum * mask)
    amp = np.abs(field)
    return (amp / amp.mean()).astype(np.float64)


def fourier_shift(img: np.ndarray, shift) -> np.ndarray:
    """Circular sub-pixel translation: output(x) = input(x - shift)."""
    rows, cols = img.shape
    dr, dc = float(shift[0]), float(shift[1])
    fr = np.fft.fftfreq(rows)[:, None]
    fc = np.fft.fftfreq(cols)[None, :]
    ramp = np.exp(-2j * np.pi * (fr * dr + fc * dc))
    return np.real(np.fft.ifft2(np.fft.fft2(img) * ramp))


# ---------------------------------------------------------------------------
# rendering


@dataclass
class RenderedScene:
    ref: SarImage
    src: SarImage
    truth: GeoRaster
    layover: GeoRaster


def _splat(model: geo.SarSensorModel, points: np.ndarray, amplitudes: np.ndarray,
           chunk: int = 2_000_000):
    """Bilinear accumulation of ground samples into the slant-range grid."""
    rows, cols = model.rows, model.cols
    acc = np.zeros(rows * cols, dtype=np.float64)
    weight = np.zeros(rows * cols, dtype=np.float64)
    col_grid = np.full(points.shape[0], np.nan)
    n = points.shape[0]
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        r, c, status = geo.forward_project_arrays(model, points[sl])
        ok = status == geo.ST_OK
        col_grid[sl] = np.where(ok, c, np.nan)
        r0 = np.floor(r).astype(np.int64)
        c0 = np.floor(c).astype(np.int64)
        ok &= (r0 >= 0) & (r0 < rows - 1) & (c0 >= 0) & (c0 < cols - 1)
        if not np.any(ok):
            continue
        r, c, r0, c0 = r[ok], c[ok], r0[ok], c0[ok]
        a = amplitudes[sl][ok]
        fr = r - r0
        fc = c - c0
        for dr_i, dc_i, w in (
            (0, 0, (1 - fr) * (1 - fc)),
            (0, 1, (1 - fr) * fc),
            (1, 0, fr * (1 - fc)),
            (1, 1, fr * fc),
        ):
            idx = (r0 + dr_i) * cols + (c0 + dc_i)
            acc += np.bincount(idx, weights=a * w, minlength=rows * cols)
            weight += np.bincount(idx, weights=w, minlength=rows * cols)
    img = np.where(weight > 1e-9, acc / np.maximum(weight, 1e-9), 0.0)
    return img.reshape(rows, cols).astype(np.float32), col_grid


def _check_footprint(model: geo.SarSensorModel, points: np.ndarray, label: str):
    corners = points[[0, -1]]
    r, c, status = geo.forward_project_arrays(model, corners)
    inside = (
        (status == geo.ST_OK)
        & (r >= 0) & (r <= model.rows - 1)
        & (c >= 0) & (c <= model.cols - 1)
    )
    if not np.all(inside):
        raise FootprintMiss(f"{label} track cannot image the full extent")


def render_pair(spec: SceneSpec) -> RenderedScene:
    """Render both slant-range images of the textured scene surface.

    Returns the image pair, the truth DSM, and a layover mask flagging cells
    where the projected range gradient reverses along the cross-track ground
    direction (flagged only, not corrected).
    """
    dsm = make_dsm(spec)
    model_a, model_b = scene_models(spec, dsm)
    points, north, east = _dsm_enu_points(spec, dsm)
    flat_points = points.reshape(-1, 3)
    texture = ground_texture((dsm.rows, dsm.cols), spec.texture_seed).reshape(-1).astype(np.float64)

    rng = np.random.default_rng(spec.texture_seed + 101)
    images = []
    layover = np.zeros((dsm.rows, dsm.cols), dtype=bool)
    for tag, model in (("ref", model_a), ("src", model_b)):
        _check_footprint(model, flat_points, tag)
        img, col_grid = _splat(model, flat_points, texture)
        cols_2d = col_grid.reshape(dsm.rows, dsm.cols)
        grad = np.gradient(cols_2d, axis=1)
        direction = np.sign(np.nanmedian(grad))
        layover |= np.nan_to_num(grad * direction) <= 0
        if spec.speckle_looks > 0:
            looks = spec.speckle_looks
            intensity = rng.gamma(shape=looks, scale=1.0 / looks, size=img.shape)
            img = (img * np.sqrt(intensity)).astype(np.float32)
        images.append(SarImage(amplitude=Raster(img), model=model, id=tag))

    layover_grid = GeoRaster(
        raster=Raster(layover.astype(np.float32)),
        origin=dsm.origin,
        lat_spacing=dsm.lat_spacing,
        lon_spacing=dsm.lon_spacing,
    )
    return RenderedScene(ref=images[0], src=images[1], truth=dsm, layover=layover_grid)
