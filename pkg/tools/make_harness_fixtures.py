#!/usr/bin/env python3
"""Regenerate the cross-implementation fixtures consumed by matcher-harness.

Writes, under matcher-harness/fixtures/:
  loss/case_k/{dhat.srgr, d.srgr, c.srgr, chat.srgr, expected.json}
      random grids plus the loss values computed by the core package
  toy_dataset/
      a small training dataset (standard layout) from a synthetic scene

Deterministic; rerunning overwrites with identical bytes.
"""

import json
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from sargram import groundtruth, metrics, raster, synth  # noqa: E402

HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURES = os.path.join(HERE, "..", "matcher-harness", "fixtures")


def make_loss_cases():
    rng = np.random.default_rng(99)
    for k in range(4):
        case_dir = os.path.join(FIXTURES, "loss", f"case_{k}")
        os.makedirs(case_dir, exist_ok=True)
        rows, cols = int(rng.integers(5, 14)), int(rng.integers(5, 14))
        d_hat = rng.uniform(-6, 6, (rows, cols, 2)).astype(np.float32)
        d = rng.uniform(-6, 6, (rows, cols, 2)).astype(np.float32)
        c = (rng.uniform(0, 1, (rows, cols)) > 0.4).astype(np.float32)
        c_hat = rng.uniform(0.02, 0.98, (rows, cols)).astype(np.float32)
        raster.write_raster(raster.Raster(d_hat), os.path.join(case_dir, "dhat.srgr"))
        raster.write_raster(raster.Raster(d), os.path.join(case_dir, "d.srgr"))
        raster.write_raster(raster.Raster(c), os.path.join(case_dir, "c.srgr"))
        raster.write_raster(raster.Raster(c_hat), os.path.join(case_dir, "chat.srgr"))
        cfg = metrics.LossConfig(weight=0.01)
        ld = metrics.loss_disparity(d_hat, d, c, cfg)
        lc = metrics.loss_confidence(c_hat, c, cfg)
        expected = {
            "weight": cfg.weight,
            "loss_disparity": ld,
            "loss_confidence": lc,
            "loss_total": metrics.loss_total(ld, lc, cfg),
        }
        with open(os.path.join(case_dir, "expected.json"), "w", encoding="utf-8") as fh:
            json.dump(expected, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"wrote 4 loss cases under {os.path.relpath(os.path.join(FIXTURES, 'loss'))}")


def make_toy_dataset():
    import shutil

    spec = synth.standard_scene(
        extent=(500.0, 500.0),
        dsm_params={
            "base": 90.0,
            "hills": [
                {"amplitude": 6.0, "sigma": 160.0, "center": (-0.15, -0.1)},
                {"amplitude": 4.0, "sigma": 130.0, "center": (0.2, 0.2)},
            ],
        },
        texture_seed=17,
    )
    scene = synth.render_pair(spec)
    out = os.path.join(FIXTURES, "toy_dataset")
    if os.path.isdir(out):
        shutil.rmtree(out)
    summary = groundtruth.build_dataset(
        {"toy": (scene.ref, scene.src)}, scene.truth, out,
        patch_height=64, patch_width=64, overlap_fraction=0.0,
        split_spec={"train": ["toy"], "val": [], "test": []},
    )
    ids = summary["splits"]["train"]["toy"]
    # deterministic 10-train / 2-val subset: the best-covered patches
    coverage = []
    for pid in ids:
        c = raster.read_raster(os.path.join(out, "train", "toy", pid, "C.srgr"))
        coverage.append((-float(c.plane().mean()), pid))
    kept = [pid for _, pid in sorted(coverage)[:12]]
    for pid in ids:
        if pid not in kept:
            shutil.rmtree(os.path.join(out, "train", "toy", pid))
    val_dir = os.path.join(out, "val", "toy")
    os.makedirs(val_dir, exist_ok=True)
    for pid in kept[10:]:
        shutil.move(os.path.join(out, "train", "toy", pid), os.path.join(val_dir, pid))
    summary["splits"]["train"]["toy"] = sorted(kept[:10])
    summary["splits"]["val"] = {"toy": sorted(kept[10:])}
    with open(os.path.join(out, "split.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"toy dataset: {len(kept[:10])} train / {len(kept[10:])} val patches")


if __name__ == "__main__":
    make_loss_cases()
    make_toy_dataset()
