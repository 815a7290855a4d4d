"""Divide a reference image into matcher-sized patches and localize their
counterparts in the source image through the projection models.

The source patch is the same size as the reference patch, centered on the
metadata-predicted correspondence of the reference patch center at the
reference elevation; residual terrain parallax is the matcher's job.  Crops
are plain copies: amplitudes are never interpolated.  When the two range
axes run in opposite ground directions (opposite-side acquisitions) the
pair is tagged ``src_col_reversed`` so matchers can flip indices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import geo
from .errors import PatchLargerThanImage
from .raster import Raster, SarImage


@dataclass(frozen=True)
class PatchSpec:
    """Reference-image patch: integer origin (row, col) and size in pixels."""

    ref_origin: tuple
    height: int
    width: int

    @property
    def center(self):
        return (
            self.ref_origin[0] + (self.height - 1) / 2.0,
            self.ref_origin[1] + (self.width - 1) / 2.0,
        )


@dataclass
class PatchPlan:
    specs: list
    patch_height: int
    patch_width: int
    overlap_fraction: float

    def __len__(self):
        return len(self.specs)

    def to_json(self) -> str:
        doc = {
            "patch_height": self.patch_height,
            "patch_width": self.patch_width,
            "overlap_fraction": self.overlap_fraction,
            "origins": [list(s.ref_origin) for s in self.specs],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PatchPlan":
        doc = json.loads(text)
        h, w = int(doc["patch_height"]), int(doc["patch_width"])
        specs = [PatchSpec((int(r), int(c)), h, w) for r, c in doc["origins"]]
        return cls(specs, h, w, float(doc["overlap_fraction"]))


@dataclass
class SrcLocation:
    """Metadata-predicted source patch placement for one reference patch."""

    origin: tuple            # integer (row, col) in the source image
    clamp_offset: tuple      # pixels the origin moved to stay in bounds
    col_reversed: bool       # source range axis runs opposite to reference
    usable: bool             # False when projection failed outright
    detail: str = ""


@dataclass
class PatchPair:
    spec: PatchSpec
    src_origin: tuple
    ref_pixels: Raster
    src_pixels: Raster
    clamp_offset: tuple = (0, 0)
    src_col_reversed: bool = False
    ref_id: str = ""
    src_id: str = ""


def _axis_positions(dim: int, patch: int, stride: int):
    positions = list(range(0, dim - patch + 1, max(stride, 1)))
    if positions[-1] != dim - patch:
        positions.append(dim - patch)
    return positions


def plan_patches(ref: SarImage, patch_height: int, patch_width: int,
                 overlap_fraction: float = 1.0 / 3.0) -> PatchPlan:
    """Row-major tiling with stride floor(dim * (1 - overlap)).

    The final row/column of patches is shifted inward so every patch is
    in-bounds, which guarantees full coverage of the image.
    """
    rows, cols = ref.model.rows, ref.model.cols
    if patch_height > rows or patch_width > cols:
        raise PatchLargerThanImage(
            f"patch {patch_height}x{patch_width} exceeds image {rows}x{cols}"
        )
    if not 0 <= overlap_fraction < 1:
        raise ValueError("overlap_fraction must lie in [0, 1)")
    stride_r = int(np.floor(patch_height * (1.0 - overlap_fraction)))
    stride_c = int(np.floor(patch_width * (1.0 - overlap_fraction)))
    specs = [
        PatchSpec((r, c), patch_height, patch_width)
        for r in _axis_positions(rows, patch_height, stride_r)
        for c in _axis_positions(cols, patch_width, stride_c)
    ]
    return PatchPlan(specs, patch_height, patch_width, overlap_fraction)


def localize_src(ref_model: geo.SarSensorModel, src_model: geo.SarSensorModel,
                 spec: PatchSpec, h_ref: float | None = None) -> SrcLocation:
    """Predict where the reference patch lies in the source image.

    Projects the patch center to the ground at ``h_ref`` (the reference
    model's reference elevation by default) and back into the source image;
    the source patch of equal size is centered there, rounded to an integer
    origin and clamped to the source bounds.  A probe point half a pixel to
    the right of center detects whether the source range axis is reversed.
    """
    if h_ref is None:
        h_ref = ref_model.reference_elevation
    center_r, center_c = spec.center
    rows = np.array([center_r, center_r])
    cols = np.array([center_c, center_c + 0.5])
    lat, lon, xyz, status = geo.inverse_project_arrays(
        ref_model, rows, cols, np.full(2, h_ref)
    )
    if not np.all(status == geo.ST_OK):
        return SrcLocation((0, 0), (0, 0), False, usable=False,
                           detail="inverse projection failed at patch center")
    src_r, src_c, fstat = geo.forward_project_arrays(src_model, xyz)
    if not np.all(fstat == geo.ST_OK):
        return SrcLocation((0, 0), (0, 0), False, usable=False,
                           detail="source projection failed at patch center")
    col_reversed = bool(src_c[1] < src_c[0])

    origin_r = int(np.rint(src_r[0] - (spec.height - 1) / 2.0))
    origin_c = int(np.rint(src_c[0] - (spec.width - 1) / 2.0))
    clamped_r = min(max(origin_r, 0), src_model.rows - spec.height)
    clamped_c = min(max(origin_c, 0), src_model.cols - spec.width)
    return SrcLocation(
        origin=(clamped_r, clamped_c),
        clamp_offset=(clamped_r - origin_r, clamped_c - origin_c),
        col_reversed=col_reversed,
        usable=True,
    )


def extract_pair(ref: SarImage, src: SarImage, spec: PatchSpec,
                 location: SrcLocation) -> PatchPair:
    """Copy the two crops; pixel values are untouched (no interpolation)."""
    r0, c0 = spec.ref_origin
    ref_crop = ref.amplitude.values[r0:r0 + spec.height, c0:c0 + spec.width].copy()
    sr, sc = location.origin
    src_crop = src.amplitude.values[sr:sr + spec.height, sc:sc + spec.width].copy()
    return PatchPair(
        spec=spec,
        src_origin=location.origin,
        ref_pixels=Raster(ref_crop, nodata=ref.amplitude.nodata),
        src_pixels=Raster(src_crop, nodata=src.amplitude.nodata),
        clamp_offset=location.clamp_offset,
        src_col_reversed=location.col_reversed,
        ref_id=ref.id,
        src_id=src.id,
    )
