"""Dataset construction: reference elevations, disparity/confidence truth,
and the on-disk training layout.

Per-pixel reference elevation comes from a fixed-point iteration
h <- surface(inverse_project(pixel, h)), which converges wherever the
terrain slope stays below the incidence angle; divergent or void pixels are
nodata.  Disparity truth is computed by reprojection: the ground point of a
reference pixel at its converged elevation is forward-projected into the
source image, and the difference to the zero-disparity position (in
source-patch-local coordinates) is the truth vector D.  The binary map C is
1 exactly where D is valid.

Dataset layout (consumed by training harnesses over the file protocol):

    dataset/<split>/<pair>/<patch>/{ref.srgr, src.srgr, D.srgr, C.srgr,
                                    elev.srgr, meta.json}
    dataset/split.json
"""

from __future__ import annotations

import json

import os
from dataclasses import dataclass

import numpy as np

from . import geo
from .errors import SplitLeakage
from .raster import (
    GeoRaster,
    Raster,
    SarImage,
    sample_bilinear_arrays,
    write_raster,
)
from .tiling import PatchPair, PatchSpec, extract_pair, localize_src, plan_patches

@dataclass
class GtPatch:
    """Ground truth bundle for one patch pair."""

    pair: PatchPair
    elevation_ref: Raster   # per-reference-pixel height, NaN where unknown
    disparity: Raster       # 2 channels (d_row, d_col), NaN where invalid
    confidence: Raster      # binary: 1 exactly where disparity is valid

def elevation_in_image_geometry(dsm: GeoRaster, model: geo.SarSensorModel,
                                region=None, tol: float = 0.05,
                                max_iter: int = 20, chunk: int = 500_000):
    """Per-pixel surface height in image geometry; returns (Raster, stats).

    ``region`` restricts the computation to (row0, col0, rows, cols); the
    default is the full image.  Stats report convergence behavior.
    """
    if region is None:
        region = (0, 0, model.rows, model.cols)
    row0, col0, n_rows, n_cols = region
    rows, cols = np.meshgrid(
        np.arange(row0, row0 + n_rows, dtype=np.float64),
        np.arange(col0, col0 + n_cols, dtype=np.float64),
        indexing="ij",
    )
    rows = rows.ravel()
    cols = cols.ravel()
    out = np.full(rows.shape, np.nan, dtype=np.float64)
    iterations_used = np.zeros(rows.shape, dtype=np.int32)

    n = rows.size
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        r = rows[sl]
        c = cols[sl]
        h = np.full(r.shape, model.reference_elevation, dtype=np.float64)
        alive = np.ones(r.shape, dtype=bool)
        result = np.full(r.shape, np.nan)
        for iteration in range(max_iter):
            idx = np.nonzero(alive)[0]
            if idx.size == 0:
                break
            lat, lon, _, status = geo.inverse_project_arrays(model, r[idx], c[idx], h[idx])
            ok = status == geo.ST_OK
            surface = np.full(idx.shape, np.nan)
            surface[ok] = sample_bilinear_arrays(dsm, lat[ok], lon[ok])
            dead = np.isnan(surface)
            alive[idx[dead]] = False
            live = idx[~dead]
            delta = surface[~dead] - h[live]
            h[live] = surface[~dead]
            iterations_used[sl][live] = iteration + 1
            settled = np.abs(delta) < tol
            result[live[settled]] = h[live[settled]]
            alive[live[settled]] = False
        out[sl] = result

    grid = out.reshape(n_rows, n_cols).astype(np.float32)
    valid = ~np.isnan(grid)
    stats = {
        "pixels": int(n_rows * n_cols),
        "converged": int(valid.sum()),
        "nodata_or_divergent": int((~valid).sum()),
        "max_iterations_used": int(iterations_used.max()) if iterations_used.size else 0,
    }
    return Raster(grid), stats

def disparity_groundtruth(gt_elev: Raster, spec: PatchSpec, src_origin,
                          ref_model: geo.SarSensorModel,
                          src_model: geo.SarSensorModel, chunk: int = 500_000):
    """Truth (D, C) for one patch from its per-pixel reference elevations.

    D maps a reference-patch pixel to its source counterpart in
    source-patch-local coordinates; pixels whose ground point projects
    outside the source patch (or with unknown elevation) get C = 0.
    """
    rows, cols = gt_elev.rows, gt_elev.cols
    heights = gt_elev.plane().astype(np.float64).ravel()
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    rr = rr.ravel().astype(np.float64)
    cc = cc.ravel().astype(np.float64)

    d = np.full((rows * cols, 2), np.nan, dtype=np.float64)
    c_map = np.zeros(rows * cols, dtype=np.float32)
    known = ~np.isnan(heights)
    idx_all = np.nonzero(known)[0]
    for start in range(0, idx_all.size, chunk):
        idx = idx_all[start:start + chunk]
        ref_rows = spec.ref_origin[0] + rr[idx]
        ref_cols = spec.ref_origin[1] + cc[idx]
        lat, lon, xyz, status = geo.inverse_project_arrays(
            ref_model, ref_rows, ref_cols, heights[idx]
        )
        ok = status == geo.ST_OK
        src_r, src_c, fstat = geo.forward_project_arrays(src_model, xyz[ok])
        ok2 = fstat == geo.ST_OK
        sub = idx[ok][ok2]
        local_r = src_r[ok2] - src_origin[0]
        local_c = src_c[ok2] - src_origin[1]
        inside = (
            (local_r >= 0) & (local_r <= rows - 1)
            & (local_c >= 0) & (local_c <= cols - 1)
        )
        sub = sub[inside]
        d[sub, 0] = local_r[inside] - rr[sub]
        d[sub, 1] = local_c[inside] - cc[sub]
        c_map[sub] = 1.0

    disparity = Raster(d.reshape(rows, cols, 2).astype(np.float32))
    confidence = Raster(c_map.reshape(rows, cols))
    return disparity, confidence

def make_gt_patch(pair: PatchPair, dsm: GeoRaster, ref_model: geo.SarSensorModel,
                  src_model: geo.SarSensorModel) -> GtPatch:
    spec = pair.spec
    region = (spec.ref_origin[0], spec.ref_origin[1], spec.height, spec.width)
    gt_elev, _ = elevation_in_image_geometry(dsm, ref_model, region=region)
    disparity, confidence = disparity_groundtruth(
        gt_elev, spec, pair.src_origin, ref_model, src_model
    )
    return GtPatch(pair=pair, elevation_ref=gt_elev, disparity=disparity,
                   confidence=confidence)

# ---------------------------------------------------------------------------
# dataset packaging

def _footprint(model: geo.SarSensorModel):
    """Geodetic bounding box of the image at its reference elevation."""
    rows = np.array([0.0, 0.0, model.rows - 1.0, model.rows - 1.0])
    cols = np.array([0.0, model.cols - 1.0, 0.0, model.cols - 1.0])
    lat, lon, _, status = geo.inverse_project_arrays(
        model, rows, cols, np.full(4, model.reference_elevation)
    )
    ok = status == geo.ST_OK
    return float(lat[ok].min()), float(lat[ok].max()), float(lon[ok].min()), float(lon[ok].max())

def _boxes_overlap(a, b, margin: float = 0.0) -> bool:
    return not (
        a[1] < b[0] - margin or b[1] < a[0] - margin
        or a[3] < b[2] - margin or b[3] < a[2] - margin
    )

def check_split(image_pairs: dict, split_spec: dict) -> None:
    """Reject splits whose test pairs share observation area with train/val."""
    boxes = {
        name: _footprint(pair[0].model) for name, pair in image_pairs.items()
    }
    test_names = split_spec.get("test", [])
    other_names = split_spec.get("train", []) + split_spec.get("val", [])
    for t in test_names:
        for o in other_names:
            if _boxes_overlap(boxes[t], boxes[o]):
                raise SplitLeakage(
                    f"pair '{o}' shares observation area with test pair '{t}'"
                )

def build_dataset(image_pairs: dict, dsm: GeoRaster, out_dir,
                  patch_height: int, patch_width: int,
                  overlap_fraction: float = 1.0 / 3.0,
                  split_spec: dict | None = None) -> dict:
    """Write the training dataset for a set of named image pairs.

    ``image_pairs`` maps a pair name to (ref SarImage, src SarImage);
    ``split_spec`` maps 'train'/'val'/'test' to lists of pair names.
    Returns a summary dict (also written as split.json).  Deterministic for
    fixed inputs.
    """
    if split_spec is None:
        split_spec = {"train": sorted(image_pairs.keys()), "val": [], "test": []}
    check_split(image_pairs, split_spec)
    os.makedirs(out_dir, exist_ok=True)

    summary = {"patch_height": patch_height, "patch_width": patch_width,
               "overlap_fraction": overlap_fraction, "splits": {}}
    for split in ("train", "val", "test"):
        summary["splits"][split] = {}
        for pair_name in split_spec.get(split, []):
            ref_img, src_img = image_pairs[pair_name]
            plan = plan_patches(ref_img, patch_height, patch_width, overlap_fraction)
            patch_ids = []
            for k, spec in enumerate(plan.specs):
                location = localize_src(ref_img.model, src_img.model, spec)
                if not location.usable:
                    continue
                pair = extract_pair(ref_img, src_img, spec, location)
                gt = make_gt_patch(pair, dsm, ref_img.model, src_img.model)
                patch_id = f"{k:05d}"
                patch_dir = os.path.join(out_dir, split, pair_name, patch_id)
                os.makedirs(patch_dir, exist_ok=True)
                write_raster(pair.ref_pixels, os.path.join(patch_dir, "ref.srgr"))
                write_raster(pair.src_pixels, os.path.join(patch_dir, "src.srgr"))
                write_raster(gt.disparity, os.path.join(patch_dir, "D.srgr"))
                write_raster(gt.confidence, os.path.join(patch_dir, "C.srgr"))
                write_raster(gt.elevation_ref, os.path.join(patch_dir, "elev.srgr"))
                meta = {
                    "pair": pair_name,
                    "patch_id": patch_id,
                    "ref_origin": list(spec.ref_origin),
                    "src_origin": list(pair.src_origin),
                    "rows": spec.height,
                    "cols": spec.width,
                    "src_col_reversed": pair.src_col_reversed,
                    "clamp_offset": list(pair.clamp_offset),
                    "ref_id": ref_img.id,
                    "src_id": src_img.id,
                }
                with open(os.path.join(patch_dir, "meta.json"), "w", encoding="utf-8") as fh:
                    json.dump(meta, fh, indent=2, sort_keys=True)
                    fh.write("\n")
                patch_ids.append(patch_id)
            summary["splits"][split][pair_name] = patch_ids

    with open(os.path.join(out_dir, "split.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
