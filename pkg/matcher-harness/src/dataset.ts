/**
 * Reader for the on-disk training layout produced by the core pipeline:
 *
 *     dataset/<split>/<pair>/<patch>/{ref.srgr, src.srgr, D.srgr, C.srgr,
 *                                     elev.srgr, meta.json}
 *     dataset/split.json
 *
 * Disparity grids carry NaN outside the valid mask; samples expose clean
 * Float64Array tensors with NaNs zeroed where C = 0 (the losses mask them).
 */

import { readFileSync, readdirSync, existsSync } from "node:fs";
import { join } from "node:path";

import { readGrid } from "./srgr.js";

export interface Sample {
  id: string;
  rows: number;
  cols: number;
  ref: Float32Array;
  src: Float32Array;
  d: Float64Array; // interleaved (dRow, dCol), NaN-free
  c: Float64Array; // binary
}

export class DatasetError extends Error {}

export function loadSample(patchDir: string): Sample {
  for (const name of ["ref.srgr", "src.srgr", "D.srgr", "C.srgr", "meta.json"]) {
    if (!existsSync(join(patchDir, name))) {
      throw new DatasetError(`dataset layout violation: missing ${join(patchDir, name)}`);
    }
  }
  const ref = readGrid(join(patchDir, "ref.srgr"));
  const src = readGrid(join(patchDir, "src.srgr"));
  const d = readGrid(join(patchDir, "D.srgr"));
  const c = readGrid(join(patchDir, "C.srgr"));
  if (d.channels !== 2 || c.channels !== 1) {
    throw new DatasetError(`dataset layout violation: bad channels in ${patchDir}`);
  }
  if (d.rows !== ref.rows || d.cols !== ref.cols || c.rows !== ref.rows) {
    throw new DatasetError(`dataset layout violation: grid dims disagree in ${patchDir}`);
  }
  const n = ref.rows * ref.cols;
  const dOut = new Float64Array(2 * n);
  const cOut = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    cOut[i] = c.values[i] > 0 ? 1 : 0;
    const dr = d.values[2 * i];
    const dc = d.values[2 * i + 1];
    dOut[2 * i] = cOut[i] > 0 && Number.isFinite(dr) ? dr : 0;
    dOut[2 * i + 1] = cOut[i] > 0 && Number.isFinite(dc) ? dc : 0;
  }
  return {
    id: patchDir,
    rows: ref.rows,
    cols: ref.cols,
    ref: ref.values,
    src: src.values,
    d: dOut,
    c: cOut,
  };
}

export function listPatchDirs(root: string, split: string): string[] {
  const splitDir = join(root, split);
  if (!existsSync(splitDir)) {
    return [];
  }
  const dirs: string[] = [];
  for (const pair of readdirSync(splitDir).sort()) {
    const pairDir = join(splitDir, pair);
    for (const patch of readdirSync(pairDir).sort()) {
      dirs.push(join(pairDir, patch));
    }
  }
  return dirs;
}

export function loadSplit(root: string, split: string): Sample[] {
  return listPatchDirs(root, split).map(loadSample);
}
