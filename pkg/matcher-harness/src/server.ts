/**
 * Queue consumer for the match file protocol.
 *
 * Scans a queue directory for request directories carrying their ready
 * marker, answers each with a flow grid (3 channels: dRow, dCol,
 * confidence in [0, 1]) plus response.json and the response marker, and
 * answers malformed requests with response.error.json instead of crashing.
 * Inference is deterministic: the same request always produces the same
 * bytes.  The loop exits when the producer drops shutdown.ready.
 */

import {
  existsSync,
  readdirSync,
  readFileSync,
  writeFileSync,
  statSync,
} from "node:fs";
import { join, basename } from "node:path";

import { readGrid, writeGrid, Grid } from "./srgr.js";
import { Predictor, EchoPredictor } from "./model.js";

const REQUEST_MARKER = "request.ready";
const RESPONSE_MARKER = "response.ready";
const SHUTDOWN_MARKER = "shutdown.ready";

export interface ServeOptions {
  queueDir: string;
  predictor: Predictor | null; // null = echo mode (any request size)
  pollMs?: number;
  once?: boolean;
}

function writeError(dir: string, message: string): void {
  const doc = { request_id: basename(dir), error: message };
  writeFileSync(join(dir, "response.error.json"), JSON.stringify(doc, null, 2) + "\n");
  writeFileSync(join(dir, RESPONSE_MARKER), "");
}

function writeFlow(dir: string, rows: number, cols: number, dHat: Float64Array, cHat: Float64Array): void {
  const n = rows * cols;
  const values = new Float32Array(3 * n);
  for (let i = 0; i < n; i++) {
    values[3 * i] = dHat[2 * i];
    values[3 * i + 1] = dHat[2 * i + 1];
    values[3 * i + 2] = Math.min(Math.max(cHat[i], 0), 1);
  }
  const grid: Grid = { rows, cols, channels: 3, nodata: null, values };
  writeGrid(join(dir, "flow.srgr"), grid);
  const doc = { request_id: basename(dir), flow: "flow.srgr" };
  writeFileSync(join(dir, "response.json"), JSON.stringify(doc, null, 2) + "\n");
  writeFileSync(join(dir, RESPONSE_MARKER), "");
}

export function answerRequest(dir: string, predictor: Predictor | null): void {
  let sidecar: any;
  try {
    sidecar = JSON.parse(readFileSync(join(dir, "request.json"), "utf-8"));
  } catch (err) {
    writeError(dir, `unreadable request.json: ${(err as Error).message}`);
    return;
  }
  const rows = Number(sidecar?.ref?.rows);
  const cols = Number(sidecar?.ref?.cols);
  if (!Number.isInteger(rows) || !Number.isInteger(cols) || rows < 1 || cols < 1) {
    writeError(dir, "request.json lacks valid ref dims");
    return;
  }
  let ref: Grid;
  let src: Grid;
  try {
    ref = readGrid(join(dir, String(sidecar.ref.path ?? "ref.srgr")));
    src = readGrid(join(dir, String(sidecar.src?.path ?? "src.srgr")));
  } catch (err) {
    writeError(dir, `unreadable patch grids: ${(err as Error).message}`);
    return;
  }
  if (ref.rows !== rows || ref.cols !== cols) {
    writeError(dir, `ref grid is ${ref.rows}x${ref.cols}, sidecar says ${rows}x${cols}`);
    return;
  }
  if (src.rows !== rows || src.cols !== cols) {
    writeError(dir, `src grid is ${src.rows}x${src.cols}, expected ${rows}x${cols}`);
    return;
  }
  const model = predictor ?? new EchoPredictor(rows, cols);
  if (model.rows !== rows || model.cols !== cols) {
    writeError(dir, `model expects ${model.rows}x${model.cols}, request is ${rows}x${cols}`);
    return;
  }
  const prediction = model.predict(ref.values, src.values);
  writeFlow(dir, rows, cols, prediction.dHat, prediction.cHat);
}

function pendingRequests(queueDir: string): string[] {
  const out: string[] = [];
  for (const name of readdirSync(queueDir).sort()) {
    const dir = join(queueDir, name);
    try {
      if (!statSync(dir).isDirectory()) continue;
    } catch {
      continue;
    }
    if (!existsSync(join(dir, REQUEST_MARKER))) continue;
    if (existsSync(join(dir, RESPONSE_MARKER))) continue;
    out.push(dir);
  }
  return out;
}

export async function serve(options: ServeOptions): Promise<void> {
  const poll = options.pollMs ?? 50;
  for (;;) {
    let served = 0;
    if (existsSync(options.queueDir)) {
      for (const dir of pendingRequests(options.queueDir)) {
        try {
          answerRequest(dir, options.predictor);
        } catch (err) {
          writeError(dir, `${(err as Error).name}: ${(err as Error).message}`);
        }
        served += 1;
      }
    }
    if (options.once) return;
    if (existsSync(join(options.queueDir, SHUTDOWN_MARKER))) return;
    if (!served) {
      await new Promise((resolve) => setTimeout(resolve, poll));
    }
  }
}
