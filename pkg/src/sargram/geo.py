"""Earth and sensor geometry.

Ellipsoid/ECEF conversions, platform trajectories, the range-Doppler
projection (forward: ground point -> image pixel; inverse: pixel + height ->
ground point) and two-ray stereo triangulation.  All solvers are written
against numpy arrays so that millions of pixels can be projected per call;
thin scalar wrappers provide the dataclass-typed API and raise typed errors.

Conventions
-----------
* ECEF coordinates in meters, geodetic latitude/longitude in radians.
* Image rows are azimuth lines (time), columns are range samples.
* Zero-Doppler (zero squint) timing: the azimuth time of a ground point is
  the instant the line of sight is perpendicular to the platform velocity.
* ``look_side`` is resolved with the cross product of velocity and nadir:
  that product points to the left of the flight direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateGeometry,
    NoIntersection,
    NonConvergence,
    NoZeroDoppler,
    OutOfTrackBounds,
)

# per-point status codes returned by the array-level solvers
ST_OK = 0
ST_NO_ZERO_DOPPLER = 1
ST_NONCONVERGENCE = 2
ST_NO_INTERSECTION = 3
ST_DEGENERATE = 4
ST_OUT_OF_BOUNDS = 5

_STATUS_ERRORS = {
    ST_NO_ZERO_DOPPLER: NoZeroDoppler,
    ST_NONCONVERGENCE: NonConvergence,
    ST_NO_INTERSECTION: NoIntersection,
    ST_DEGENERATE: DegenerateGeometry,
    ST_OUT_OF_BOUNDS: OutOfTrackBounds,
}


def raise_for_status(status: int, context: str = "") -> None:
    """Raise the typed error matching a non-OK solver status code."""
    if status == ST_OK:
        return
    exc = _STATUS_ERRORS.get(int(status), NonConvergence)
    raise exc(context or exc.__doc__)


@dataclass(frozen=True)
class Ellipsoid:
    """Oblate reference ellipsoid (semi-major axis in meters, flattening)."""

    semi_major_axis: float
    flattening: float

    def __post_init__(self):
        if not self.semi_major_axis > 0:
            raise ValueError("semi_major_axis must be positive")
        if not 0 <= self.flattening < 1:
            raise ValueError("flattening must lie in [0, 1)")

    @property
    def semi_minor_axis(self) -> float:
        return self.semi_major_axis * (1.0 - self.flattening)

    @property
    def eccentricity_sq(self) -> float:
        f = self.flattening
        return f * (2.0 - f)


WGS84 = Ellipsoid(semi_major_axis=6378137.0, flattening=1.0 / 298.257223563)


def _normalize_longitude(lon: float) -> float:
    lon = math.fmod(lon + math.pi, 2.0 * math.pi)
    if lon <= 0.0:
        lon += 2.0 * math.pi
    return lon - math.pi


@dataclass(frozen=True)
class GeodeticCoord:
    """Geodetic latitude/longitude in radians, height in meters."""

    latitude: float
    longitude: float
    height: float = 0.0

    def __post_init__(self):
        if abs(self.latitude) > math.pi / 2 + 1e-12:
            raise ValueError("latitude outside [-pi/2, pi/2]")
        object.__setattr__(self, "longitude", _normalize_longitude(self.longitude))

    @classmethod
    def from_degrees(cls, lat_deg: float, lon_deg: float, height: float = 0.0) -> "GeodeticCoord":
        return cls(math.radians(lat_deg), math.radians(lon_deg), height)


@dataclass(frozen=True)
class EcefPoint:
    """Earth-centered earth-fixed cartesian point, meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError("ECEF components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "EcefPoint":
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class PlatformState:
    """Platform position/velocity at one instant."""

    time: float
    position: EcefPoint
    velocity: tuple  # (vx, vy, vz) m/s

    def __post_init__(self):
        v = np.asarray(self.velocity, dtype=np.float64)
        if not np.linalg.norm(v) > 0:
            raise ValueError("velocity magnitude must be positive")
        object.__setattr__(self, "velocity", (float(v[0]), float(v[1]), float(v[2])))


INTERP_LINEAR_POSITION = "piecewise-linear-position"
INTERP_VELOCITY_REFINED = "piecewise-constant-velocity-refined"


class Trajectory:
    """Ordered platform states with piecewise interpolation.

    ``piecewise-linear-position`` (default): position is interpolated
    linearly between samples and velocity is the segment slope, which keeps
    the zero-Doppler Newton derivative exact.  The alternative
    ``piecewise-constant-velocity-refined`` mode dead-reckons from the left
    sample with its stored velocity.
    """

    def __init__(self, samples, interpolation: str = INTERP_LINEAR_POSITION):
        if len(samples) < 2:
            raise ValueError("trajectory needs at least 2 samples")
        times = np.array([s.time for s in samples], dtype=np.float64)
        if not np.all(np.diff(times) > 0):
            raise ValueError("sample times must be strictly increasing")
        if interpolation not in (INTERP_LINEAR_POSITION, INTERP_VELOCITY_REFINED):
            raise ValueError(f"unknown interpolation mode {interpolation!r}")
        self.interpolation = interpolation
        self.times = times
        self.positions = np.array(
            [[s.position.x, s.position.y, s.position.z] for s in samples], dtype=np.float64
        )
        self.velocities = np.array([s.velocity for s in samples], dtype=np.float64)
        dt = np.diff(times)[:, None]
        self._seg_vel = np.diff(self.positions, axis=0) / dt

    @classmethod
    def from_arrays(cls, times, positions, velocities=None,
                    interpolation: str = INTERP_LINEAR_POSITION) -> "Trajectory":
        times = np.asarray(times, dtype=np.float64)
        positions = np.asarray(positions, dtype=np.float64)
        if len(times) < 2:
            raise ValueError("trajectory needs at least 2 samples")
        if not np.all(np.diff(times) > 0):
            raise ValueError("sample times must be strictly increasing")
        if velocities is None:
            seg = np.diff(positions, axis=0) / np.diff(times)[:, None]
            velocities = np.vstack([seg, seg[-1]])
        samples = [
            PlatformState(float(t), EcefPoint.from_array(p), tuple(v))
            for t, p, v in zip(times, positions, np.asarray(velocities, dtype=np.float64))
        ]
        return cls(samples, interpolation=interpolation)

    @property
    def time_span(self):
        return float(self.times[0]), float(self.times[-1])

    def extrapolation_bounds(self):
        """Times may exceed the samples by at most one end-segment interval."""
        t0, t1 = self.times[0], self.times[-1]
        return (float(t0 - (self.times[1] - t0)),
                float(t1 + (t1 - self.times[-2])))

    def state_arrays(self, t):
        """Vectorized state lookup: returns (pos (N,3), vel (N,3), inbounds (N,))."""
        t = np.asarray(t, dtype=np.float64)
        lo, hi = self.extrapolation_bounds()
        inbounds = (t >= lo) & (t <= hi)
        seg = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2)
        tau = (t - self.times[seg])[..., None]
        if self.interpolation == INTERP_LINEAR_POSITION:
            vel = self._seg_vel[seg]
            pos = self.positions[seg] + vel * tau
        else:
            vel = self.velocities[seg]
            pos = self.positions[seg] + vel * tau
        return pos, vel, inbounds


def interpolate_state(trajectory: Trajectory, time: float) -> PlatformState:
    """State at ``time``; extrapolation beyond one sample interval is refused."""
    pos, vel, inbounds = trajectory.state_arrays(np.array([time]))
    if not inbounds[0]:
        raise OutOfTrackBounds(f"time {time} outside track bounds {trajectory.extrapolation_bounds()}")
    return PlatformState(time, EcefPoint.from_array(pos[0]), tuple(vel[0]))


@dataclass(frozen=True)
class SarSensorModel:
    """Per-image acquisition metadata: trajectory plus range/azimuth timing."""

    trajectory: Trajectory
    near_range: float            # m, range of column 0
    range_spacing: float         # m/pixel
    azimuth_start_time: float    # s, time of row 0
    azimuth_time_spacing: float  # s/line
    rows: int
    cols: int
    look_side: str = "right"
    reference_elevation: float = 0.0
    ellipsoid: Ellipsoid = field(default_factory=lambda: WGS84)

    def __post_init__(self):
        if not self.near_range > 0:
            raise ValueError("near_range must be positive")
        if not self.range_spacing > 0:
            raise ValueError("range_spacing must be positive")
        if self.azimuth_time_spacing == 0:
            raise ValueError("azimuth_time_spacing must be nonzero")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("image dimensions must be at least 1x1")
        if self.look_side not in ("left", "right"):
            raise ValueError("look_side must be 'left' or 'right'")

    def azimuth_time(self, row):
        return self.azimuth_start_time + np.asarray(row, dtype=np.float64) * self.azimuth_time_spacing

    def row_of_time(self, t):
        return (np.asarray(t, dtype=np.float64) - self.azimuth_start_time) / self.azimuth_time_spacing

    def slant_range(self, col):
        return self.near_range + np.asarray(col, dtype=np.float64) * self.range_spacing


@dataclass(frozen=True)
class ImageCoord:
    """Real-valued (row, col) image position; sub-pixel values allowed."""

    row: float
    col: float

    def __post_init__(self):
        if not (math.isfinite(self.row) and math.isfinite(self.col)):
            raise ValueError("image coordinates must be finite")


# ---------------------------------------------------------------------------
# geodetic <-> ECEF


def geodetic_to_ecef_arrays(lat, lon, height, ellipsoid: Ellipsoid = WGS84):
    """Closed-form geodetic -> ECEF on the given ellipsoid (arrays ok)."""
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    height = np.asarray(height, dtype=np.float64)
    a, e2 = ellipsoid.semi_major_axis, ellipsoid.eccentricity_sq
    sin_lat, cos_lat = np.sin(lat), np.cos(lat)
    n = a / np.sqrt(1.0 - e2 * sin_lat * sin_lat)
    x = (n + height) * cos_lat * np.cos(lon)
    y = (n + height) * cos_lat * np.sin(lon)
    z = (n * (1.0 - e2) + height) * sin_lat
    return x, y, z


def geodetic_to_ecef(coord: GeodeticCoord, ellipsoid: Ellipsoid = WGS84) -> EcefPoint:
    x, y, z = geodetic_to_ecef_arrays(coord.latitude, coord.longitude, coord.height, ellipsoid)
    return EcefPoint(float(x), float(y), float(z))


def ecef_to_geodetic_arrays(x, y, z, ellipsoid: Ellipsoid = WGS84, max_iter: int = 50):
    """Iterative ECEF -> geodetic; returns (lat, lon, height, converged).

    The height update uses the exact identity h = p cos(lat) + z sin(lat) - a W
    with W = sqrt(1 - e2 sin^2(lat)), so convergence is measured directly in
    meters of height and radians of latitude.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    a, e2 = ellipsoid.semi_major_axis, ellipsoid.eccentricity_sq
    b = ellipsoid.semi_minor_axis
    p = np.hypot(x, y)
    lon = np.arctan2(y, x)

    polar = p < 1e-6
    lat = np.where(polar, np.sign(z) * (math.pi / 2), np.arctan2(z, p * (1.0 - e2)))
    height = np.zeros_like(lat)
    converged = np.zeros(lat.shape, dtype=bool)
    prev_h = np.full_like(lat, np.inf)
    prev_lat = np.full_like(lat, np.inf)
    for _ in range(max_iter):
        sin_lat = np.sin(lat)
        w = np.sqrt(1.0 - e2 * sin_lat * sin_lat)
        n = a / w
        height = p * np.cos(lat) + z * sin_lat - a * w
        lat_new = np.arctan2(z, p * (1.0 - e2 * n / (n + height)))
        converged = (np.abs(height - prev_h) < 1e-7) & (np.abs(lat_new - prev_lat) < 1e-13)
        prev_h, prev_lat = height, lat_new
        lat = np.where(polar, lat, lat_new)
        if np.all(converged | polar):
            converged = converged | polar
            break
    if np.any(polar):
        lat = np.where(polar, np.sign(z) * (math.pi / 2), lat)
        height = np.where(polar, np.abs(z) - b, height)
        converged = converged | polar
    return lat, lon, height, converged


def ecef_to_geodetic(point: EcefPoint, ellipsoid: Ellipsoid = WGS84) -> GeodeticCoord:
    norm = math.sqrt(point.x**2 + point.y**2 + point.z**2)
    if not norm > 0:
        raise ValueError("cannot convert the earth center")
    lat, lon, h, ok = ecef_to_geodetic_arrays(
        np.array([point.x]), np.array([point.y]), np.array([point.z]), ellipsoid
    )
    if not ok[0]:
        raise NonConvergence("ECEF->geodetic iteration did not converge (degenerate near-center input)")
    return GeodeticCoord(float(lat[0]), float(lon[0]), float(h[0]))


def geodetic_up_arrays(lat, lon):
    """Unit ellipsoidal normal (the gradient direction of geodetic height)."""
    cos_lat = np.cos(lat)
    return np.stack([cos_lat * np.cos(lon), cos_lat * np.sin(lon), np.sin(lat)], axis=-1)


def enu_basis(origin: GeodeticCoord, ellipsoid: Ellipsoid = WGS84):
    """Local east/north/up unit vectors and ECEF origin at ``origin``."""
    o = geodetic_to_ecef(origin, ellipsoid).as_array()
    sin_lat, cos_lat = math.sin(origin.latitude), math.cos(origin.latitude)
    sin_lon, cos_lon = math.sin(origin.longitude), math.cos(origin.longitude)
    east = np.array([-sin_lon, cos_lon, 0.0])
    north = np.array([-sin_lat * cos_lon, -sin_lat * sin_lon, cos_lat])
    up = np.array([cos_lat * cos_lon, cos_lat * sin_lon, sin_lat])
    return o, east, north, up


def meridian_radius(lat: float, ellipsoid: Ellipsoid = WGS84) -> float:
    a, e2 = ellipsoid.semi_major_axis, ellipsoid.eccentricity_sq
    s = math.sin(lat)
    return a * (1.0 - e2) / (1.0 - e2 * s * s) ** 1.5


def prime_vertical_radius(lat: float, ellipsoid: Ellipsoid = WGS84) -> float:
    a, e2 = ellipsoid.semi_major_axis, ellipsoid.eccentricity_sq
    s = math.sin(lat)
    return a / math.sqrt(1.0 - e2 * s * s)


def meters_to_angles(lat: float, east_m, north_m, ellipsoid: Ellipsoid = WGS84):
    """Convert local east/north offsets in meters to (dlon, dlat) radians."""
    dlat = np.asarray(north_m, dtype=np.float64) / meridian_radius(lat, ellipsoid)
    dlon = np.asarray(east_m, dtype=np.float64) / (prime_vertical_radius(lat, ellipsoid) * math.cos(lat))
    return dlon, dlat


# ---------------------------------------------------------------------------
# range-Doppler projection


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def forward_project_arrays(model: SarSensorModel, xyz, max_iter: int = 100,
                           tol: float = 1e-9):
    """Zero-Doppler forward projection of ECEF points (N,3) -> (rows, cols, status).

    Newton iteration on f(t) = (X - S(t)) . V(t); with a piecewise-linear
    track each step solves a segment exactly, so convergence takes one hop
    per segment crossed.  Columns may land outside [0, cols); callers clamp.
    """
    xyz = np.atleast_2d(np.asarray(xyz, dtype=np.float64))
    traj = model.trajectory
    lo, hi = traj.extrapolation_bounds()
    p0, p1 = traj.positions[0], traj.positions[-1]
    chord = p1 - p0
    chord_len2 = float(chord @ chord)
    span = traj.times[-1] - traj.times[0]
    frac = ((xyz - p0) @ chord) / chord_len2
    t = traj.times[0] + np.clip(frac, -0.6, 1.6) * span

    status = np.full(xyz.shape[0], ST_NONCONVERGENCE, dtype=np.int8)
    converged = np.zeros(xyz.shape[0], dtype=bool)
    for _ in range(max_iter):
        t = np.clip(t, lo, hi)
        s, v, _ = traj.state_arrays(t)
        f = _dot(xyz - s, v)
        dt = f / _dot(v, v)
        t = t + dt
        converged = np.abs(dt) < tol
        if np.all(converged):
            break

    # a Newton target beyond the allowed extrapolation means the zero-Doppler
    # point lies ahead of or behind the entire track
    beyond = (t < lo) | (t > hi)
    status[converged & ~beyond] = ST_OK
    status[beyond] = ST_NO_ZERO_DOPPLER
    t = np.clip(t, lo, hi)
    s, v, _ = traj.state_arrays(t)
    rng = np.linalg.norm(xyz - s, axis=-1)
    rows = model.row_of_time(t)
    cols = (rng - model.near_range) / model.range_spacing
    return rows, cols, status


def forward_project(model: SarSensorModel, point: EcefPoint) -> ImageCoord:
    rows, cols, status = forward_project_arrays(model, point.as_array()[None, :])
    raise_for_status(status[0], "forward projection failed")
    return ImageCoord(float(rows[0]), float(cols[0]))


def _look_direction(model: SarSensorModel, s, v, up_platform):
    """Horizontal unit vector from the platform toward the imaged side."""
    nadir = -up_platform
    left = np.cross(v, nadir)
    left /= np.linalg.norm(left, axis=-1, keepdims=True)
    return left if model.look_side == "left" else -left


def inverse_project_arrays(model: SarSensorModel, rows, cols, heights,
                           max_iter: int = 50, tol: float = 1e-5):
    """Pixel + geodetic height -> ground point; returns (lat, lon, xyz, status).

    Solves the 3x3 system {range sphere, zero-Doppler plane, geodetic height}
    by Gauss-Newton, starting from the geometric look-angle guess on the
    model's look side.  The height residual uses the exact ellipsoidal
    normal, so the returned point sits on the true constant-height surface.
    """
    rows = np.atleast_1d(np.asarray(rows, dtype=np.float64))
    cols = np.atleast_1d(np.asarray(cols, dtype=np.float64))
    heights = np.broadcast_to(np.asarray(heights, dtype=np.float64), rows.shape).copy()
    ell = model.ellipsoid

    t = model.azimuth_time(rows)
    s, v, inb = model.trajectory.state_arrays(t)
    rng = model.slant_range(cols)
    status = np.where(inb, ST_OK, ST_OUT_OF_BOUNDS).astype(np.int8)

    lat_p, lon_p, h_p, _ = ecef_to_geodetic_arrays(s[:, 0], s[:, 1], s[:, 2], ell)
    up_p = geodetic_up_arrays(lat_p, lon_p)
    look = _look_direction(model, s, v, up_p)
    # range sphere entirely above the height surface: no intersection
    depth = h_p - heights
    status[(rng < depth - 1.0) & (status == ST_OK)] = ST_NO_INTERSECTION

    cos_g = np.clip(depth / np.maximum(rng, 1.0), -1.0, 1.0)
    sin_g = np.sqrt(np.maximum(0.0, 1.0 - cos_g * cos_g))
    x = s + rng[:, None] * (-up_p * cos_g[:, None] + look * sin_g[:, None])

    v_hat = v / np.linalg.norm(v, axis=-1, keepdims=True)
    active = status == ST_OK
    converged = np.zeros(rows.shape, dtype=bool)
    for _ in range(max_iter):
        if not np.any(active):
            break
        d = x - s
        dist = np.linalg.norm(d, axis=-1)
        u_los = d / np.maximum(dist, 1e-12)[:, None]
        lat_x, lon_x, h_x, _ = ecef_to_geodetic_arrays(x[:, 0], x[:, 1], x[:, 2], ell)
        up_x = geodetic_up_arrays(lat_x, lon_x)
        res = np.stack([dist - rng, _dot(d, v_hat), h_x - heights], axis=-1)
        worst = np.max(np.abs(res), axis=-1)
        newly = active & (worst < tol)
        converged |= newly
        active &= ~newly
        if not np.any(active):
            break
        jac = np.stack([u_los, v_hat, up_x], axis=-2)  # (N, 3, 3)
        idx = np.nonzero(active)[0]
        try:
            delta = np.linalg.solve(jac[idx], -res[idx][..., None])[..., 0]
        except np.linalg.LinAlgError:
            status[idx] = ST_NONCONVERGENCE
            active[idx] = False
            continue
        x[idx] += delta
    status[(status == ST_OK) & ~converged] = ST_NONCONVERGENCE
    lat_x, lon_x, _, _ = ecef_to_geodetic_arrays(x[:, 0], x[:, 1], x[:, 2], ell)
    return lat_x, lon_x, x, status


def inverse_project(model: SarSensorModel, coord: ImageCoord, height: float) -> GeodeticCoord:
    lat, lon, _, status = inverse_project_arrays(
        model, np.array([coord.row]), np.array([coord.col]), np.array([height])
    )
    raise_for_status(status[0], "inverse projection failed")
    return GeodeticCoord(float(lat[0]), float(lon[0]), float(height))


def _condition_number(jtj):
    """Condition number of J from the eigenvalues of JtJ (batched)."""
    w = np.linalg.eigvalsh(jtj)
    lo = np.maximum(w[..., 0], 0.0)
    hi = np.maximum(w[..., -1], 1e-300)
    with np.errstate(divide="ignore"):
        return np.sqrt(np.where(lo > 0, hi / np.maximum(lo, 1e-300), np.inf))


def triangulate_arrays(model_a: SarSensorModel, rows_a, cols_a,
                       model_b: SarSensorModel, rows_b, cols_b,
                       max_iter: int = 50, cond_limit: float = 1e8):
    """Stereo intersection of two pixel observations -> (xyz, residual, status).

    Minimizes the stacked 4-residual system (two range residuals in meters,
    two zero-Doppler residuals scaled to meters by projecting on the unit
    velocity) over X in R^3 with Gauss-Newton, initialized at the inverse
    projection of the first observation at the model's reference elevation.
    ``residual`` is the RMS of the four residuals at the solution.
    """
    rows_a = np.atleast_1d(np.asarray(rows_a, dtype=np.float64))
    cols_a = np.atleast_1d(np.asarray(cols_a, dtype=np.float64))
    rows_b = np.atleast_1d(np.asarray(rows_b, dtype=np.float64))
    cols_b = np.atleast_1d(np.asarray(cols_b, dtype=np.float64))
    n = rows_a.shape[0]

    t_a = model_a.azimuth_time(rows_a)
    s_a, v_a, inb_a = model_a.trajectory.state_arrays(t_a)
    t_b = model_b.azimuth_time(rows_b)
    s_b, v_b, inb_b = model_b.trajectory.state_arrays(t_b)
    rng_a = model_a.slant_range(cols_a)
    rng_b = model_b.slant_range(cols_b)
    va_hat = v_a / np.linalg.norm(v_a, axis=-1, keepdims=True)
    vb_hat = v_b / np.linalg.norm(v_b, axis=-1, keepdims=True)

    _, _, x, st0 = inverse_project_arrays(
        model_a, rows_a, cols_a, np.full(n, model_a.reference_elevation)
    )
    status = st0.copy()
    status[~(inb_a & inb_b)] = ST_OUT_OF_BOUNDS

    def residuals(x):
        d_a = x - s_a
        d_b = x - s_b
        dist_a = np.linalg.norm(d_a, axis=-1)
        dist_b = np.linalg.norm(d_b, axis=-1)
        res = np.stack(
            [dist_a - rng_a, dist_b - rng_b, _dot(d_a, va_hat), _dot(d_b, vb_hat)], axis=-1
        )
        u_a = d_a / np.maximum(dist_a, 1e-12)[:, None]
        u_b = d_b / np.maximum(dist_b, 1e-12)[:, None]
        jac = np.stack([u_a, u_b, va_hat, vb_hat], axis=-2)  # (N, 4, 3)
        return res, jac

    active = status == ST_OK
    converged = np.zeros(n, dtype=bool)
    res = jac = None
    for _ in range(max_iter):
        res, jac = residuals(x)
        if not np.any(active):
            break
        jtj = np.einsum("nij,nik->njk", jac, jac)
        jtr = np.einsum("nij,ni->nj", jac, res)
        det = np.linalg.det(jtj)
        singular = active & (np.abs(det) < 1e-12)
        status[singular] = ST_DEGENERATE
        active &= ~singular
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        delta = np.linalg.solve(jtj[idx], -jtr[idx][..., None])[..., 0]
        x[idx] += delta
        step = np.max(np.abs(delta), axis=-1)
        newly = idx[step < 1e-7]
        converged[newly] = True
        active[newly] = False

    res, jac = residuals(x)
    jtj = np.einsum("nij,nik->njk", jac, jac)
    cond = _condition_number(jtj)
    status[(status == ST_OK) & (cond > cond_limit)] = ST_DEGENERATE
    status[(status == ST_OK) & ~converged] = ST_NONCONVERGENCE
    residual = np.sqrt(np.mean(res * res, axis=-1))
    return x, residual, status


def triangulate(model_a: SarSensorModel, coord_a: ImageCoord,
                model_b: SarSensorModel, coord_b: ImageCoord):
    """Scalar stereo intersection; returns (EcefPoint, rms residual in meters)."""
    xyz, residual, status = triangulate_arrays(
        model_a, np.array([coord_a.row]), np.array([coord_a.col]),
        model_b, np.array([coord_b.row]), np.array([coord_b.col]),
    )
    raise_for_status(status[0], "triangulation failed")
    return EcefPoint.from_array(xyz[0]), float(residual[0])
