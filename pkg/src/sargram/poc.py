"""Phase-only correlation matching.

``poc_surface`` computes the inverse transform of the normalized, band
limited cross-phase spectrum R = (F . conj(G)) / |F . conj(G)| of two
windowed blocks.  Because the band mask is a separable rectangle of K odd
frequency bins per axis, the correlation peak of a pure translation is the
separable Dirichlet kernel

    D(x) = sin(pi K x / M) / (K sin(pi x / M)),

which ``estimate_shift`` fits on the 3x3 neighborhood of the integer peak
by inverting the one-dimensional three-sample ratio of that kernel (a
precomputed monotone table), falling back to a separable quadratic fit.
``match_patch`` wraps the estimator in a coarse-to-fine pyramid over a node
grid and densifies the result to a per-pixel flow field.

Unmatchable content is in-band data: constant blocks (zero spectrum) and
peaks below the accept threshold yield confidence 0, never exceptions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import PatchTooSmall
from .raster import Raster
from .tiling import PatchPair


@dataclass(frozen=True)
class PocParams:
    block_size: int = 32
    pyramid_levels: int = 3
    grid_stride: int = 8
    spectral_band: float = 0.5   # fraction of Nyquist kept per axis
    peak_accept_threshold: float = 0.1
    consistency_max_px: float = 3.0   # node rejection vs 3x3 median; <=0 disables
    max_empty_fraction: float = 0.05  # tolerated fraction of zero pixels per block

    def __post_init__(self):
        b = self.block_size
        if b < 16 or (b & (b - 1)) != 0:
            raise ValueError("block_size must be a power of two >= 16")
        if not 0 < self.spectral_band <= 1:
            raise ValueError("spectral_band must lie in (0, 1]")
        if not 0 <= self.peak_accept_threshold <= 1:
            raise ValueError("peak_accept_threshold must lie in [0, 1]")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if self.grid_stride < 1:
            raise ValueError("grid_stride must be >= 1")


@dataclass
class FlowGrid:
    """Dense per-pixel displacement (d_row, d_col) and confidence in [0, 1].

    Displacement maps a reference pixel to its source counterpart:
    src = ref + displacement.  NaN displacement marks unmatched pixels,
    which always carry confidence 0.
    """

    displacement: np.ndarray  # (rows, cols, 2) float32
    confidence: np.ndarray    # (rows, cols) float32

    def __post_init__(self):
        self.displacement = np.asarray(self.displacement, dtype=np.float32)
        self.confidence = np.asarray(self.confidence, dtype=np.float32)
        if self.displacement.ndim != 3 or self.displacement.shape[2] != 2:
            raise ValueError("displacement must have shape (rows, cols, 2)")
        if self.confidence.shape != self.displacement.shape[:2]:
            raise ValueError("confidence shape must match displacement")
        if self.confidence.size:
            cmin, cmax = float(np.nanmin(self.confidence)), float(np.nanmax(self.confidence))
            if cmin < 0.0 or cmax > 1.0:
                raise ValueError("confidence must lie in [0, 1]")
        matched = self.confidence > 0
        if matched.any() and not np.all(np.isfinite(self.displacement[matched])):
            raise ValueError("displacement must be finite wherever confidence > 0")

    @property
    def rows(self) -> int:
        return self.confidence.shape[0]

    @property
    def cols(self) -> int:
        return self.confidence.shape[1]

    def to_raster(self) -> Raster:
        stacked = np.concatenate(
            [self.displacement, self.confidence[:, :, None]], axis=2
        ).astype(np.float32)
        return Raster(stacked)

    @classmethod
    def from_raster(cls, raster: Raster) -> "FlowGrid":
        if raster.channels != 3:
            raise ValueError("flow rasters carry exactly 3 channels")
        v = raster.values
        return cls(displacement=v[:, :, 0:2].copy(), confidence=v[:, :, 2].copy())


@lru_cache(maxsize=32)
def _band_bins(block: int, band: float) -> int:
    """Odd count of retained frequency bins per axis (Nyquist bin excluded)."""
    half = int(np.floor(band * block / 2.0))
    return min(2 * half + 1, block - 1)


@lru_cache(maxsize=32)
def _band_mask_half(block: int, band: float) -> np.ndarray:
    """Band mask on the half-spectrum grid used with rfft2."""
    k = (_band_bins(block, band) - 1) // 2
    f_rows = np.fft.fftfreq(block) * block
    f_cols = np.fft.rfftfreq(block) * block
    keep = (np.abs(f_rows)[:, None] <= k) & (np.abs(f_cols)[None, :] <= k)
    return keep.astype(np.float32)


@lru_cache(maxsize=32)
def _window(block: int) -> np.ndarray:
    w = np.hanning(block)
    return np.outer(w, w).astype(np.float32)


@lru_cache(maxsize=32)
def _ratio_table(block: int, band: float):
    """Monotone map between the 3-sample peak ratio and the sub-pixel offset.

    For the Dirichlet kernel D and offset d, the observable
    u(d) = (D(1-d) - D(1+d)) / (2 D(d) + D(1-d) + D(1+d)) is odd and
    monotone on |d| <= 0.65; inverting it by interpolation realizes the
    closed-form band-limited peak model fit.
    """
    k = _band_bins(block, band)

    def kernel(x):
        x = np.asarray(x, dtype=np.float64)
        num = np.sin(np.pi * k * x / block)
        den = k * np.sin(np.pi * x / block)
        out = np.where(np.abs(den) > 1e-12, num / np.maximum(np.abs(den), 1e-300) * np.sign(den), 1.0)
        return out

    d = np.linspace(-0.65, 0.65, 1301)
    y0 = kernel(d)
    yp = kernel(1.0 - d)
    ym = kernel(1.0 + d)
    u = (yp - ym) / (2.0 * y0 + yp + ym)
    if not np.all(np.diff(u) > 0):
        # extremely narrow bands can break monotonicity; restrict the range
        good = np.ones(len(u), dtype=bool)
        good[1:] = np.diff(u) > 0
        u, d = u[good], d[good]
    return u, d


def poc_surface(f: np.ndarray, g: np.ndarray, params: PocParams = PocParams()) -> np.ndarray:
    """Correlation surface of two equal, power-of-two blocks.

    The returned array is centered: entry (i, j) is the correlation for a
    displacement of g relative to f of (i - M//2, j - N//2) pixels.  The
    surface is normalized so a perfect match peaks at 1; a constant block
    (zero spectrum) yields a near-zero surface rather than an error.
    """
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if f.shape != g.shape or f.ndim != 2:
        raise ValueError("blocks must share one 2D shape")
    if f.shape[0] != f.shape[1] or (f.shape[0] & (f.shape[0] - 1)) != 0 or f.shape[0] < 16:
        raise ValueError("block dimension must be a power of two >= 16")
    surf = _surface_batch(f[None], g[None], f.shape[0], params.spectral_band)[0]
    return surf


def _surface_batch(fb: np.ndarray, gb: np.ndarray, block: int, band: float) -> np.ndarray:
    """Centered correlation surfaces for stacked block pairs (B, M, M).

    Real inputs make the cross-phase spectrum Hermitian, so the whole
    pipeline runs on the half spectrum in single precision.
    """
    win = _window(block)
    fb = np.asarray(fb, dtype=np.float32)
    gb = np.asarray(gb, dtype=np.float32)
    fw = (fb - fb.mean(axis=(-2, -1), keepdims=True)) * win
    gw = (gb - gb.mean(axis=(-2, -1), keepdims=True)) * win
    spec_f = np.fft.rfft2(fw)
    spec_g = np.fft.rfft2(gw)
    cross = spec_f * np.conj(spec_g)
    mag = np.abs(cross)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(mag > 1e-12, cross / np.maximum(mag, np.float32(1e-30)), 0.0)
    mask = _band_mask_half(block, band)
    k = _band_bins(block, band)
    raw = np.fft.irfft2(r * mask, s=(block, block)) * (block * block) / (k * k)
    # R peaks at index -v for displacement v; reverse so the surface is
    # indexed by the displacement itself, then center it
    flipped = np.roll(raw[..., ::-1, ::-1], 1, axis=(-2, -1))
    return np.fft.fftshift(flipped, axes=(-2, -1))


def _subpixel_axis(y_minus, y0, y_plus, block: int, band: float):
    """Per-axis sub-pixel offset from three samples around the peak."""
    u_tab, d_tab = _ratio_table(block, band)
    denom = 2.0 * y0 + y_plus + y_minus
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(np.abs(denom) > 1e-12, (y_plus - y_minus) / denom, 0.0)
    model_ok = (y0 > 0) & (u >= u_tab[0]) & (u <= u_tab[-1])
    d_model = np.interp(u, u_tab, d_tab)
    # fallback: separable quadratic vertex
    curv = y_plus + y_minus - 2.0 * y0
    with np.errstate(invalid="ignore", divide="ignore"):
        d_quad = np.where(np.abs(curv) > 1e-12, 0.5 * (y_minus - y_plus) / curv, 0.0)
    d_quad = np.clip(d_quad, -1.0, 1.0)
    return np.where(model_ok, d_model, d_quad)


def _integer_peak(surfaces: np.ndarray):
    """Peak value and signed integer displacement of stacked surfaces."""
    b = surfaces.shape[0]
    m = surfaces.shape[-1]
    flat = surfaces.reshape(b, -1)
    idx = np.argmax(flat, axis=1)
    peak = flat[np.arange(b), idx]
    return (idx // m) - m // 2, (idx % m) - m // 2, peak


def _roll_blocks(gb: np.ndarray, dr: np.ndarray, dc: np.ndarray) -> np.ndarray:
    """Per-block circular shift cancelling an integer displacement."""
    b, m, _ = gb.shape
    rows = (np.arange(m)[None, :] + dr[:, None]) % m
    cols = (np.arange(m)[None, :] + dc[:, None]) % m
    return gb[np.arange(b)[:, None, None], rows[:, :, None], cols[:, None, :]]


def _estimate_refined_batch(fb: np.ndarray, gb: np.ndarray, block: int, band: float):
    """Two-pass estimation: integer peak, circular recenter, model fit.

    Recentering restores the window overlap lost at large displacements, so
    the sub-pixel fit always operates near the center of its validity.
    """
    surf = _surface_batch(fb, gb, block, band)
    ir, ic, _ = _integer_peak(surf)
    g2 = _roll_blocks(gb, ir, ic)
    surf2 = _surface_batch(fb, g2, block, band)
    dr, dc, peak = _peak_and_subpixel(surf2, block, band)
    half = block / 2.0
    return np.clip(dr + ir, -half, half), np.clip(dc + ic, -half, half), peak


def _peak_and_subpixel(surfaces: np.ndarray, block: int, band: float):
    """Integer peak + model-fit refinement for stacked surfaces (B, M, M)."""
    b = surfaces.shape[0]
    m = surfaces.shape[-1]
    flat = surfaces.reshape(b, -1)
    idx = np.argmax(flat, axis=1)
    peak = flat[np.arange(b), idx]
    pr = idx // m
    pc = idx % m

    rows_idx = (pr[:, None] + np.array([-1, 0, 1])[None, :]) % m
    cols_idx = (pc[:, None] + np.array([-1, 0, 1])[None, :]) % m
    batch = np.arange(b)[:, None]
    col_cut = surfaces[batch, rows_idx, pc[:, None]]  # vary row
    row_cut = surfaces[batch, pr[:, None], cols_idx]  # vary col
    sub_r = _subpixel_axis(col_cut[:, 0], col_cut[:, 1], col_cut[:, 2], m, band)
    sub_c = _subpixel_axis(row_cut[:, 0], row_cut[:, 1], row_cut[:, 2], m, band)

    dr = (pr - m // 2) + sub_r
    dc = (pc - m // 2) + sub_c
    half = block / 2.0
    dr = np.clip(dr, -half, half)
    dc = np.clip(dc, -half, half)
    return dr, dc, peak


def estimate_shift(f: np.ndarray, g: np.ndarray, params: PocParams = PocParams()):
    """Sub-pixel displacement of g relative to f; returns (d_row, d_col, peak).

    A peak below ``peak_accept_threshold`` is reported through the returned
    confidence, not as an exception; |estimate| is bounded by half a block.
    """
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if f.shape != g.shape or f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise ValueError("blocks must share one square 2D shape")
    dr, dc, peak = _estimate_refined_batch(
        f[None], g[None], f.shape[0], params.spectral_band
    )
    return float(dr[0]), float(dc[0]), float(peak[0])


def _downsample(img: np.ndarray) -> np.ndarray:
    r = (img.shape[0] // 2) * 2
    c = (img.shape[1] // 2) * 2
    v = img[:r, :c]
    return 0.25 * (v[0::2, 0::2] + v[1::2, 0::2] + v[0::2, 1::2] + v[1::2, 1::2])


def _gather_blocks(img: np.ndarray, r0: np.ndarray, c0: np.ndarray, block: int) -> np.ndarray:
    rows = r0[:, None, None] + np.arange(block)[None, :, None]
    cols = c0[:, None, None] + np.arange(block)[None, None, :]
    return img[rows, cols]


def _median3(grid: np.ndarray) -> np.ndarray:
    """3x3 median with edge padding, applied per channel of (nr, nc, k)."""
    padded = np.pad(grid, ((1, 1), (1, 1), (0, 0)), mode="edge")
    stack = [
        padded[i:i + grid.shape[0], j:j + grid.shape[1]]
        for i in range(3)
        for j in range(3)
    ]
    return np.median(np.stack(stack, axis=0), axis=0)


def match_patch(pair: PatchPair, params: PocParams = PocParams()) -> FlowGrid:
    """Dense displacement field for one patch pair via pyramid block matching.

    Integer displacements propagate from the coarsest pyramid level to the
    finest, where the sub-pixel estimator runs on a node grid of spacing
    ``grid_stride``; node displacements are bilinearly densified to every
    pixel and confidences copied from the nearest node.  Nodes whose peak
    falls below the accept threshold are rejected: their pixels get NaN
    displacement and confidence 0.
    """
    ref = pair.ref_pixels.plane().astype(np.float64)
    src = pair.src_pixels.plane().astype(np.float64)
    if pair.src_col_reversed:
        src = src[:, ::-1]
    rows, cols = ref.shape
    block = params.block_size
    need = block * 2 ** (params.pyramid_levels - 1)
    if rows < need or cols < need:
        raise PatchTooSmall(
            f"patch {rows}x{cols} cannot host {params.pyramid_levels} pyramid "
            f"levels of {block}-pixel blocks (needs {need})"
        )

    pyr_ref = [ref]
    pyr_src = [src]
    for _ in range(params.pyramid_levels - 1):
        pyr_ref.append(_downsample(pyr_ref[-1]))
        pyr_src.append(_downsample(pyr_src[-1]))

    half = block // 2
    node_r = np.arange(half, rows - half + 1, params.grid_stride)
    node_c = np.arange(half, cols - half + 1, params.grid_stride)
    nr, nc = len(node_r), len(node_c)
    centers_r = np.repeat(node_r, nc).astype(np.float64)
    centers_c = np.tile(node_c, nr).astype(np.float64)
    disp = np.zeros((nr * nc, 2), dtype=np.float64)

    band = params.spectral_band
    peak = np.zeros(nr * nc)
    for level in range(params.pyramid_levels - 1, -1, -1):
        scale = 2 ** level
        lref = pyr_ref[level]
        lsrc = pyr_src[level]
        lr, lc = lref.shape
        # the node grid thins with the pyramid: coarse displacements vary
        # slowly, so estimating every 2^level-th node suffices
        ir = np.arange(0, nr, scale)
        ic = np.arange(0, nc, scale)
        sel = (ir[:, None] * nc + ic[None, :]).ravel()
        sub_cr = centers_r[sel]
        sub_cc = centers_c[sel]
        sub_d = disp[sel]
        ref_r0 = np.clip(np.rint(sub_cr / scale).astype(np.int64) - half, 0, lr - block)
        ref_c0 = np.clip(np.rint(sub_cc / scale).astype(np.int64) - half, 0, lc - block)
        want_r0 = np.rint((sub_cr + sub_d[:, 0]) / scale).astype(np.int64) - half
        want_c0 = np.rint((sub_cc + sub_d[:, 1]) / scale).astype(np.int64) - half
        src_r0 = np.clip(want_r0, 0, lr - block)
        src_c0 = np.clip(want_c0, 0, lc - block)
        fb = _gather_blocks(lref, ref_r0, ref_c0, block)
        gb = _gather_blocks(lsrc, src_r0, src_c0, block)
        if level > 0:
            # integer update only while climbing the pyramid
            surfaces = _surface_batch(fb, gb, block, band)
            dr, dc, sub_peak = _integer_peak(surfaces)
        else:
            dr, dc, sub_peak = _estimate_refined_batch(fb, gb, block, band)
            # a source block pushed off its target by clamping measures the
            # flow of the wrong place; a block contaminated by empty pixels
            # correlates on the swath boundary step, not on content
            limit = max(4, block // 4)
            clamped = (
                (np.abs(want_r0 - src_r0) > limit) | (np.abs(want_c0 - src_c0) > limit)
            )
            empty_f = (fb <= 0).mean(axis=(1, 2))
            empty_g = (gb <= 0).mean(axis=(1, 2))
            sub_peak = np.where(
                clamped
                | (empty_f > params.max_empty_fraction)
                | (empty_g > params.max_empty_fraction),
                0.0, sub_peak,
            )
        new_r = (src_r0 - ref_r0 + dr) * scale
        new_c = (src_c0 - ref_c0 + dc) * scale
        keep = sub_peak >= min(0.05, params.peak_accept_threshold)
        sub_new = np.stack(
            [np.where(keep, new_r, sub_d[:, 0]), np.where(keep, new_c, sub_d[:, 1])],
            axis=-1,
        )
        if level > 0:
            sub_grid = sub_new.reshape(len(ir), len(ic), 2)
            full = np.repeat(np.repeat(sub_grid, scale, axis=0), scale, axis=1)
            disp = full[:nr, :nc].reshape(nr * nc, 2)
            disp = _median3(disp.reshape(nr, nc, 2)).reshape(nr * nc, 2)
        else:
            disp = sub_new
            peak = sub_peak

    node_conf = np.clip(peak, 0.0, 1.0)
    node_valid = node_conf >= params.peak_accept_threshold
    node_disp = disp.reshape(nr, nc, 2)
    node_conf = node_conf.reshape(nr, nc)
    node_valid = node_valid.reshape(nr, nc)

    if params.consistency_max_px > 0:
        # kill nodes that disagree with their neighborhood; isolated junk
        # peaks survive the confidence test but not this one
        med = _median3(node_disp)
        deviation = np.max(np.abs(node_disp - med), axis=-1)
        node_valid &= deviation <= params.consistency_max_px

    flow, conf = _densify(
        node_disp, node_conf, node_valid, node_r, node_c, rows, cols, params.grid_stride
    )

    if pair.src_col_reversed:
        # displacement was measured against the column-flipped source;
        # convert back to true source indices per pixel
        col_idx = np.arange(cols, dtype=np.float32)[None, :]
        flow[:, :, 1] = (cols - 1.0) - 2.0 * col_idx - flow[:, :, 1]
        flow[:, :, 1][conf <= 0] = np.nan
    return FlowGrid(displacement=flow.astype(np.float32), confidence=conf.astype(np.float32))


def _densify(node_disp, node_conf, node_valid, node_r, node_c, rows, cols, stride):
    """Bilinear interpolation of valid nodes; nearest-node confidence."""
    nr, nc = node_conf.shape
    pr = (np.arange(rows, dtype=np.float64) - node_r[0]) / stride
    pc = (np.arange(cols, dtype=np.float64) - node_c[0]) / stride
    r0 = np.clip(np.floor(pr).astype(np.int64), 0, max(nr - 2, 0))
    c0 = np.clip(np.floor(pc).astype(np.int64), 0, max(nc - 2, 0))
    fr = np.clip(pr - r0, 0.0, 1.0)[:, None]
    fc = np.clip(pc - c0, 0.0, 1.0)[None, :]

    w00 = (1 - fr) * (1 - fc)
    w01 = (1 - fr) * fc
    w10 = fr * (1 - fc)
    w11 = fr * fc
    r1 = np.minimum(r0 + 1, nr - 1)
    c1 = np.minimum(c0 + 1, nc - 1)

    flow = np.zeros((rows, cols, 2), dtype=np.float64)
    wsum = np.zeros((rows, cols), dtype=np.float64)
    for rr, cc, w in ((r0, c0, w00), (r0, c1, w01), (r1, c0, w10), (r1, c1, w11)):
        valid = node_valid[rr[:, None], cc[None, :]]
        weight = np.where(valid, w, 0.0)
        wsum += weight
        for ch in range(2):
            flow[:, :, ch] += weight * node_disp[rr[:, None], cc[None, :], ch]

    matched = wsum > 1e-9
    flow = np.where(matched[:, :, None], flow / np.maximum(wsum, 1e-9)[:, :, None], np.nan)

    nearest_r = np.clip(np.rint(pr).astype(np.int64), 0, nr - 1)
    nearest_c = np.clip(np.rint(pc).astype(np.int64), 0, nc - 1)
    conf = node_conf[nearest_r[:, None], nearest_c[None, :]]
    conf_valid = node_valid[nearest_r[:, None], nearest_c[None, :]]
    conf = np.where(conf_valid & matched, conf, 0.0)
    flow[conf <= 0] = np.nan
    return flow, conf
