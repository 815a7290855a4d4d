"""Operator command line: stage-by-stage pipeline plus a one-shot runner.

Stages communicate only through documented on-disk artifacts, so any stage
can be re-run from its predecessor's output directory:

    synth        scene/{ref,src}.{json,srgr}, dsm.json+srgr, layover.srgr
    tile         tiles/plan.json, tiles/pairs/p_#####/{ref,src}.srgr+patch.json
    match        flows/flow_#####.srgr, flows/match_report.json
    triangulate  clouds/cloud_#####.npz (or .xyz), triangulate_report.json
    fuse         map/map.json, map/map.srgr, map/map.support.srgr
    calibrate    calibration.json
    eval         eval/{stats.json, table.txt, curve.csv}
    render       error_map.png

``run-all`` chains them and writes report.json with the resolved
configuration, per-stage counters and timings.  Flags override values from
``--config file.json``; all randomness funnels through --seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from . import bridge, groundtruth, metrics, poc, raster, reconstruct, synth, tiling
from .errors import SargramError, SpawnFailure

_INPUT_ERRORS = (
    FileNotFoundError,
    json.JSONDecodeError,
)


def log(stage: str, event: str, **kv) -> None:
    parts = [f"stage={stage}", f"event={event}"]
    parts += [f"{k}={v}" for k, v in kv.items()]
    print(" ".join(parts), file=sys.stderr)


def _write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _parse_patch(text: str):
    h, w = text.lower().split("x")
    return int(h), int(w)


def _parse_fraction(text: str) -> float:
    if "/" in text:
        num, den = text.split("/")
        return float(num) / float(den)
    return float(text)


def _poc_params(args) -> poc.PocParams:
    return poc.PocParams(
        block_size=args.block_size,
        pyramid_levels=args.pyramid_levels,
        grid_stride=args.grid_stride,
        spectral_band=args.spectral_band,
        peak_accept_threshold=args.peak_threshold,
    )


def _recon_params(args) -> reconstruct.ReconstructParams:
    return reconstruct.ReconstructParams(
        confidence_min=args.confidence_min,
        residual_max=args.residual_max,
        cell_size=args.cell_size,
        aggregator=args.aggregator,
        pixel_stride=args.pixel_stride,
    )


# ---------------------------------------------------------------------------
# stages


def stage_synth(args) -> dict:
    out = os.path.join(args.out, "scene")
    os.makedirs(out, exist_ok=True)
    dsm_params = None
    if args.dsm_params:
        dsm_params = _read_json(args.dsm_params)
    spec = synth.standard_scene(
        intersection_angle=args.intersection_angle,
        geometry=args.geometry,
        extent=(args.extent, args.extent),
        dsm_kind=args.dsm_kind,
        dsm_params=dsm_params,
        texture_seed=args.seed,
        speckle_looks=args.speckle_looks,
        azimuth_spacing=args.azimuth_spacing,
        range_spacing=args.range_spacing,
    )
    scene = synth.render_pair(spec)
    for tag, img in (("ref", scene.ref), ("src", scene.src)):
        raster.write_raster(img.amplitude, os.path.join(out, f"{tag}.srgr"))
        raster.write_manifest(
            img.model, os.path.join(out, f"{tag}.json"),
            image_id=img.id, amplitude=f"{tag}.srgr",
        )
    raster.write_georaster(scene.truth, os.path.join(out, "dsm.json"))
    raster.write_raster(scene.layover.raster, os.path.join(out, "layover.srgr"))
    _write_json(os.path.join(out, "scene.json"), {
        "extent_m": args.extent,
        "intersection_angle_deg": args.intersection_angle,
        "geometry": args.geometry,
        "dsm_kind": args.dsm_kind,
        "seed": args.seed,
        "speckle_looks": args.speckle_looks,
    })
    log("synth", "done", rows=scene.ref.model.rows, cols=scene.ref.model.cols)
    return {
        "ref_rows": scene.ref.model.rows, "ref_cols": scene.ref.model.cols,
        "src_rows": scene.src.model.rows, "src_cols": scene.src.model.cols,
        "outputs": out,
    }


def stage_tile(args) -> dict:
    ref = raster.load_sar_image(args.ref)
    src = raster.load_sar_image(args.src)
    patch_h, patch_w = _parse_patch(args.patch)
    overlap = _parse_fraction(args.overlap)
    plan = tiling.plan_patches(ref, patch_h, patch_w, overlap)
    out = os.path.join(args.out, "tiles")
    pairs_dir = os.path.join(out, "pairs")
    os.makedirs(pairs_dir, exist_ok=True)
    with open(os.path.join(out, "plan.json"), "w", encoding="utf-8") as fh:
        fh.write(plan.to_json())
    usable = 0
    for k, spec in enumerate(plan.specs):
        location = tiling.localize_src(ref.model, src.model, spec)
        pdir = os.path.join(pairs_dir, f"p_{k:05d}")
        os.makedirs(pdir, exist_ok=True)
        meta = {
            "index": k,
            "ref_origin": list(spec.ref_origin),
            "rows": spec.height,
            "cols": spec.width,
            "usable": location.usable,
            "src_origin": list(location.origin),
            "clamp_offset": list(location.clamp_offset),
            "src_col_reversed": location.col_reversed,
        }
        if location.usable:
            pair = tiling.extract_pair(ref, src, spec, location)
            raster.write_raster(pair.ref_pixels, os.path.join(pdir, "ref.srgr"))
            raster.write_raster(pair.src_pixels, os.path.join(pdir, "src.srgr"))
            usable += 1
        _write_json(os.path.join(pdir, "patch.json"), meta)
    log("tile", "done", patches=len(plan), usable=usable)
    return {"patches": len(plan), "usable": usable, "outputs": out}


def _load_pairs(tiles_dir):
    pairs_dir = os.path.join(tiles_dir, "pairs")
    entries = []
    for name in sorted(os.listdir(pairs_dir)):
        pdir = os.path.join(pairs_dir, name)
        meta = _read_json(os.path.join(pdir, "patch.json"))
        entries.append((pdir, meta))
    return entries


def _pair_from_entry(pdir, meta) -> tiling.PatchPair:
    spec = tiling.PatchSpec(tuple(meta["ref_origin"]), meta["rows"], meta["cols"])
    return tiling.PatchPair(
        spec=spec,
        src_origin=tuple(meta["src_origin"]),
        ref_pixels=raster.read_raster(os.path.join(pdir, "ref.srgr")),
        src_pixels=raster.read_raster(os.path.join(pdir, "src.srgr")),
        clamp_offset=tuple(meta["clamp_offset"]),
        src_col_reversed=meta["src_col_reversed"],
    )


def stage_match(args) -> dict:
    tiles_dir = os.path.join(args.out, "tiles") if args.tiles is None else args.tiles
    entries = _load_pairs(tiles_dir)
    flows_dir = os.path.join(args.out, "flows")
    os.makedirs(flows_dir, exist_ok=True)
    report = {"matcher": args.matcher, "patches": len(entries), "matched": 0,
              "skipped": 0, "failures": []}

    usable = [(pdir, meta) for pdir, meta in entries if meta["usable"]]
    report["skipped"] = len(entries) - len(usable)

    if args.matcher == "poc":
        params = _poc_params(args)

        def run_one(item):
            pdir, meta = item
            pair = _pair_from_entry(pdir, meta)
            return meta["index"], poc.match_patch(pair, params)

        if args.jobs > 1:
            with ThreadPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(run_one, usable))
        else:
            results = [run_one(item) for item in usable]
        for index, flow in results:
            raster.write_raster(flow.to_raster(), os.path.join(flows_dir, f"flow_{index:05d}.srgr"))
            report["matched"] += 1
    elif args.matcher.startswith("external:"):
        command = args.matcher.split(":", 1)[1]
        pairs = [_pair_from_entry(pdir, meta) for pdir, meta in usable]
        queue = os.path.join(args.out, "match_queue")
        result = bridge.run_external_matcher(
            command, pairs, queue, parallelism=args.jobs, timeout=args.timeout
        )
        for (pdir, meta), flow in zip(usable, result.flows):
            if flow is None:
                continue
            raster.write_raster(
                flow.to_raster(), os.path.join(flows_dir, f"flow_{meta['index']:05d}.srgr")
            )
            report["matched"] += 1
        report["failures"] = [
            {"patch": usable[i][1]["index"], "error": msg} for i, msg in result.failures
        ]
    else:
        raise ValueError(f"unknown matcher {args.matcher!r} (use 'poc' or 'external:CMD')")

    _write_json(os.path.join(flows_dir, "match_report.json"), report)
    log("match", "done", matched=report["matched"], failed=len(report["failures"]))
    return {**report, "outputs": flows_dir}


def stage_triangulate(args) -> dict:
    tiles_dir = os.path.join(args.out, "tiles") if args.tiles is None else args.tiles
    flows_dir = os.path.join(args.out, "flows") if args.flows is None else args.flows
    ref_model, _ = raster.read_manifest(args.ref)
    src_model, _ = raster.read_manifest(args.src)
    params = _recon_params(args)
    clouds_dir = os.path.join(args.out, "clouds")
    os.makedirs(clouds_dir, exist_ok=True)
    entries = [(p, m) for p, m in _load_pairs(tiles_dir) if m["usable"]]
    totals = {"patches": 0, "points": 0}
    drops = None

    def run_one(item):
        pdir, meta = item
        flow_path = os.path.join(flows_dir, f"flow_{meta['index']:05d}.srgr")
        if not os.path.exists(flow_path):
            return None
        flow = poc.FlowGrid.from_raster(raster.read_raster(flow_path))
        spec = tiling.PatchSpec(tuple(meta["ref_origin"]), meta["rows"], meta["cols"])
        cloud, rep = reconstruct.flow_to_points(
            flow, spec, tuple(meta["src_origin"]), ref_model, src_model, params
        )
        return meta["index"], cloud, rep

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = [r for r in pool.map(run_one, entries) if r is not None]
    else:
        results = [r for r in map(run_one, entries) if r is not None]

    for index, cloud, rep in results:
        if args.format == "ascii":
            cloud.to_ascii(os.path.join(clouds_dir, f"cloud_{index:05d}.xyz"))
        else:
            cloud.save_npz(os.path.join(clouds_dir, f"cloud_{index:05d}.npz"))
        totals["patches"] += 1
        totals["points"] += len(cloud)
        if drops is None:
            drops = rep.as_dict()
        else:
            for k, v in rep.as_dict().items():
                drops[k] += v
    report = {**totals, "drops": drops or {}, "format": args.format}
    _write_json(os.path.join(clouds_dir, "triangulate_report.json"), report)
    log("triangulate", "done", patches=totals["patches"], points=totals["points"])
    return {**report, "outputs": clouds_dir}


def stage_fuse(args) -> dict:
    clouds_dir = os.path.join(args.out, "clouds") if args.clouds is None else args.clouds
    params = _recon_params(args)
    clouds = []
    for name in sorted(os.listdir(clouds_dir)):
        path = os.path.join(clouds_dir, name)
        if name.endswith(".npz"):
            clouds.append(reconstruct.PointCloud.load_npz(path))
        elif name.endswith(".xyz"):
            clouds.append(reconstruct.PointCloud.from_ascii(path))
    emap = reconstruct.fuse(clouds, params)
    map_dir = os.path.join(args.out, "map")
    os.makedirs(map_dir, exist_ok=True)
    emap.save(os.path.join(map_dir, "map.json"))
    filled = int(emap.valid_mask().sum())
    report = {
        "rows": emap.elevation.rows, "cols": emap.elevation.cols,
        "cells_filled": filled, "cell_size_m": params.cell_size,
        "aggregator": params.aggregator,
    }
    _write_json(os.path.join(map_dir, "fuse_report.json"), report)
    log("fuse", "done", rows=emap.elevation.rows, cols=emap.elevation.cols, filled=filled)
    return {**report, "outputs": map_dir}


def _load_map(args) -> reconstruct.ElevationMap:
    map_path = os.path.join(args.out, "map", "map.json") if args.map is None else args.map
    return reconstruct.ElevationMap.load(map_path)


def stage_calibrate(args) -> dict:
    emap = _load_map(args)
    dsm = raster.read_georaster(args.dsm)
    de, dn, du = reconstruct.calibrate_offsets(emap, dsm)
    doc = {"d_east_m": de, "d_north_m": dn, "d_up_m": du}
    _write_json(os.path.join(args.out, "calibration.json"), doc)
    log("calibrate", "done", d_east=round(de, 3), d_north=round(dn, 3), d_up=round(du, 3))
    return {**doc, "outputs": os.path.join(args.out, "calibration.json")}


def _maybe_calibrated(args, emap):
    path = args.calibration
    if path is None:
        default = os.path.join(args.out, "calibration.json")
        path = default if os.path.exists(default) else None
    if path is None:
        return emap, None
    doc = _read_json(path)
    offsets = (doc["d_east_m"], doc["d_north_m"], doc["d_up_m"])
    return reconstruct.apply_calibration(emap, offsets), offsets


def stage_eval(args) -> dict:
    emap = _load_map(args)
    dsm = raster.read_georaster(args.dsm)
    emap, offsets = _maybe_calibrated(args, emap)
    thresholds = tuple(float(t) for t in args.thresholds.split(","))
    stats = metrics.error_stats(emap, dsm, thresholds=thresholds)
    eval_dir = os.path.join(args.out, "eval")
    os.makedirs(eval_dir, exist_ok=True)
    with open(os.path.join(eval_dir, "stats.json"), "w", encoding="utf-8") as fh:
        fh.write(stats.to_json())
    with open(os.path.join(eval_dir, "table.txt"), "w", encoding="utf-8") as fh:
        fh.write(stats.to_table(args.label))
    with open(os.path.join(eval_dir, "curve.csv"), "w", encoding="utf-8") as fh:
        fh.write(stats.to_curve_csv())
    log("eval", "done", mean=round(stats.mean_error, 3), std=round(stats.std_error, 3),
        coverage=round(stats.coverage, 4))
    out = stats.as_dict()
    out["calibration_applied"] = offsets is not None
    out["outputs"] = eval_dir
    return out


def stage_render(args) -> dict:
    emap = _load_map(args)
    dsm = raster.read_georaster(args.dsm)
    emap, _ = _maybe_calibrated(args, emap)
    path = os.path.join(args.out, "error_map.png")
    metrics.render_error_map(emap, dsm, path, vmax=args.vmax)
    log("render", "done", path=path)
    return {"outputs": path}


def stage_dataset(args) -> dict:
    ref = raster.load_sar_image(args.ref)
    src = raster.load_sar_image(args.src)
    dsm = raster.read_georaster(args.dsm)
    patch_h, patch_w = _parse_patch(args.patch)
    split_spec = _read_json(args.splits) if args.splits else None
    pair_name = args.pair_name
    summary = groundtruth.build_dataset(
        {pair_name: (ref, src)}, dsm, os.path.join(args.out, "dataset"),
        patch_height=patch_h, patch_width=patch_w,
        overlap_fraction=_parse_fraction(args.overlap),
        split_spec=split_spec or {"train": [pair_name], "val": [], "test": []},
    )
    counts = {s: sum(len(v) for v in d.values()) for s, d in summary["splits"].items()}
    log("dataset", "done", **counts)
    return {"splits": counts, "outputs": os.path.join(args.out, "dataset")}


def _relativize(obj, root: str):
    """Rewrite run-dir paths as './...' so reports are location-independent."""
    if isinstance(obj, dict):
        return {k: _relativize(v, root) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_relativize(v, root) for v in obj]
    if isinstance(obj, str) and obj.startswith(root):
        return "." + obj[len(root):]
    return obj


def run_all(args) -> dict:
    report = {"config": _resolved_config(args), "seed": args.seed, "stages": {},
              "timings": {}}
    scene_dir = os.path.join(args.out, "scene")

    def timed(name, fn):
        t0 = time.monotonic()
        report["stages"][name] = fn()
        report["timings"][name] = round(time.monotonic() - t0, 3)

    timed("synth", lambda: stage_synth(args))
    args.ref = os.path.join(scene_dir, "ref.json")
    args.src = os.path.join(scene_dir, "src.json")
    args.dsm = os.path.join(scene_dir, "dsm.json")
    report["config"] = _resolved_config(args)
    timed("tile", lambda: stage_tile(args))
    timed("match", lambda: stage_match(args))
    timed("triangulate", lambda: stage_triangulate(args))
    timed("fuse", lambda: stage_fuse(args))
    timed("calibrate", lambda: stage_calibrate(args))
    timed("eval", lambda: stage_eval(args))
    timed("render", lambda: stage_render(args))
    report = _relativize(report, args.out.rstrip("/"))
    _write_json(os.path.join(args.out, "report.json"), report)
    log("run-all", "done", out=args.out)
    return report


# ---------------------------------------------------------------------------
# argument plumbing


def _resolved_config(args) -> dict:
    skip = {"func", "config"}
    return {
        k: v for k, v in sorted(vars(args).items())
        if k not in skip and not callable(v)
    }


def _add_common(p):
    p.add_argument("--config", help="JSON file of defaults; flags override it")
    p.add_argument("--out", required=True, help="output directory of the run")
    p.add_argument("--jobs", type=int, default=1, help="patch-level parallelism")
    p.add_argument("--seed", type=int, default=7, help="seed for all randomness")


def _add_scene(p):
    p.add_argument("--extent", type=float, default=2000.0, help="scene size [m]")
    p.add_argument("--intersection-angle", type=float, default=43.0)
    p.add_argument("--geometry", choices=("opposite", "same"), default="opposite")
    p.add_argument("--dsm-kind", default="gaussian-hills",
                   choices=("flat", "ramp", "gaussian-hills"))
    p.add_argument("--dsm-params", help="JSON file with surface parameters")
    p.add_argument("--speckle-looks", type=int, default=0)
    p.add_argument("--azimuth-spacing", type=float, default=1.0)
    p.add_argument("--range-spacing", type=float, default=0.7)


def _add_tiling(p):
    p.add_argument("--patch", default="560x560", help="patch size HxW [px]")
    p.add_argument("--overlap", default="1/3", help="overlap fraction")


def _add_poc(p):
    p.add_argument("--block-size", type=int, default=32)
    p.add_argument("--pyramid-levels", type=int, default=3)
    p.add_argument("--grid-stride", type=int, default=8)
    p.add_argument("--spectral-band", type=float, default=0.5)
    p.add_argument("--peak-threshold", type=float, default=0.1)


def _add_recon(p):
    p.add_argument("--confidence-min", type=float, default=0.1)
    p.add_argument("--residual-max", type=float, default=5.0)
    p.add_argument("--cell-size", type=float, default=2.0)
    p.add_argument("--aggregator", choices=("median", "mean"), default="median")
    p.add_argument("--pixel-stride", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sargram",
        description="Stereo radargrammetry: elevation from slant-range SAR image pairs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    parser.sub_commands = {}
    _original_add = sub.add_parser

    def add_parser(name, **kwargs):
        p = _original_add(name, **kwargs)
        parser.sub_commands[name] = p
        return p

    sub.add_parser = add_parser

    p = sub.add_parser("synth", help="render a synthetic stereo scene")
    _add_common(p)
    _add_scene(p)
    p.set_defaults(func=stage_synth)

    p = sub.add_parser("dataset", help="build a training dataset from an image pair")
    _add_common(p)
    p.add_argument("--ref", required=True, help="reference image manifest")
    p.add_argument("--src", required=True, help="source image manifest")
    p.add_argument("--dsm", required=True, help="surface-model manifest")
    p.add_argument("--pair-name", default="pair-0")
    p.add_argument("--splits", help="JSON {train/val/test: [pair names]}")
    _add_tiling(p)
    p.set_defaults(func=stage_dataset)

    p = sub.add_parser("tile", help="plan and extract patch pairs")
    _add_common(p)
    p.add_argument("--ref", required=True)
    p.add_argument("--src", required=True)
    _add_tiling(p)
    p.set_defaults(func=stage_tile)

    p = sub.add_parser("match", help="dense correspondence per patch pair")
    _add_common(p)
    p.add_argument("--tiles", help="tiles directory (default: <out>/tiles)")
    p.add_argument("--matcher", default="poc", help="'poc' or 'external:<command>'")
    p.add_argument("--timeout", type=float, default=120.0)
    _add_poc(p)
    p.set_defaults(func=stage_match)

    p = sub.add_parser("triangulate", help="flows to 3D point clouds")
    _add_common(p)
    p.add_argument("--ref", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--tiles")
    p.add_argument("--flows")
    p.add_argument("--format", choices=("npz", "ascii"), default="npz")
    _add_recon(p)
    p.set_defaults(func=stage_triangulate)

    p = sub.add_parser("fuse", help="grid point clouds into an elevation map")
    _add_common(p)
    p.add_argument("--clouds")
    _add_recon(p)
    p.set_defaults(func=stage_fuse)

    p = sub.add_parser("calibrate", help="estimate residual ENU offsets vs a reference")
    _add_common(p)
    p.add_argument("--map", help="elevation-map manifest (default: <out>/map/map.json)")
    p.add_argument("--dsm", required=True)
    p.set_defaults(func=stage_calibrate)

    p = sub.add_parser("eval", help="error statistics against a reference surface")
    _add_common(p)
    p.add_argument("--map")
    p.add_argument("--dsm", required=True)
    p.add_argument("--calibration", help="calibration.json to apply before scoring")
    p.add_argument("--thresholds", default="0.5,1,2,4,8")
    p.add_argument("--label", default="synthetic")
    p.set_defaults(func=stage_eval)

    p = sub.add_parser("render", help="signed error map as PNG")
    _add_common(p)
    p.add_argument("--map")
    p.add_argument("--dsm", required=True)
    p.add_argument("--calibration")
    p.add_argument("--vmax", type=float, default=5.0)
    p.set_defaults(func=stage_render)

    p = sub.add_parser("run-all", help="synth + full pipeline + report")
    _add_common(p)
    _add_scene(p)
    _add_tiling(p)
    p.add_argument("--matcher", default="poc")
    p.add_argument("--timeout", type=float, default=120.0)
    _add_poc(p)
    _add_recon(p)
    p.add_argument("--tiles")
    p.add_argument("--flows")
    p.add_argument("--clouds")
    p.add_argument("--map")
    p.add_argument("--calibration")
    p.add_argument("--format", choices=("npz", "ascii"), default="npz")
    p.add_argument("--thresholds", default="0.5,1,2,4,8")
    p.add_argument("--label", default="synthetic")
    p.add_argument("--vmax", type=float, default=5.0)
    p.set_defaults(func=run_all)

    return parser


def _apply_config_file(parser, argv):
    """Let --config provide defaults that explicit flags override.

    Defaults must land on the chosen subcommand's parser: subparsers parse
    into a fresh namespace, so parent-level defaults would be shadowed.
    """
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if known.config:
        config = _read_json(known.config)
        bad = {k for k in config if "-" in k}
        if bad:
            raise SargramError(f"config keys use underscores, not dashes: {sorted(bad)}")
        command = next((a for a in argv if not a.startswith("-") and a in parser.sub_commands), None)
        target = parser.sub_commands.get(command, parser)
        target.set_defaults(**config)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        if "--config" in argv:
            _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        args.func(args)
        return 0
    except _INPUT_ERRORS as exc:
        print(f"error category=input {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except SpawnFailure as exc:
        print(f"error category=matcher SpawnFailure: {exc}", file=sys.stderr)
        return 4
    except SargramError as exc:
        print(f"error category=processing {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error category=config ValueError: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
