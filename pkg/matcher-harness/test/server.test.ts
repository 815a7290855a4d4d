import assert from "node:assert/strict";
import { test } from "node:test";
import { mkdtempSync, mkdirSync, writeFileSync, readFileSync, existsSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { answerRequest } from "../src/server.js";
import { encodeGrid, readGrid, Grid } from "../src/srgr.js";

function patchGrid(rows: number, cols: number, seed = 1): Grid {
  const values = new Float32Array(rows * cols);
  for (let i = 0; i < values.length; i++) {
    values[i] = Math.fround(Math.abs(Math.sin(seed + i * 0.7)) + 0.05);
  }
  return { rows, cols, channels: 1, nodata: null, values };
}

function writeRequest(dir: string, rows: number, cols: number, srcRows = rows, srcCols = cols): void {
  mkdirSync(dir, { recursive: true });
  writeFileSync(join(dir, "ref.srgr"), encodeGrid(patchGrid(rows, cols, 1)));
  writeFileSync(join(dir, "src.srgr"), encodeGrid(patchGrid(srcRows, srcCols, 2)));
  const sidecar = {
    request_id: "req",
    ref: { path: "ref.srgr", origin: [0, 0], rows, cols, image_id: "a" },
    src: { path: "src.srgr", origin: [0, 0], rows, cols, image_id: "b" },
    src_col_reversed: false,
  };
  writeFileSync(join(dir, "request.json"), JSON.stringify(sidecar, null, 2));
  writeFileSync(join(dir, "request.ready"), "");
}

test("echo mode answers with a conforming zero flow", () => {
  const dir = join(mkdtempSync(join(tmpdir(), "serve-")), "req_00000");
  writeRequest(dir, 24, 32);
  answerRequest(dir, null);
  assert.ok(existsSync(join(dir, "response.ready")), "marker written");
  assert.ok(existsSync(join(dir, "response.json")));
  const flow = readGrid(join(dir, "flow.srgr"));
  assert.equal(flow.rows, 24);
  assert.equal(flow.cols, 32);
  assert.equal(flow.channels, 3);
  for (let i = 0; i < 24 * 32; i++) {
    assert.equal(flow.values[3 * i], 0);
    assert.equal(flow.values[3 * i + 1], 0);
    assert.equal(flow.values[3 * i + 2], 1);
  }
});

test("confidence always lands in [0, 1]", () => {
  const dir = join(mkdtempSync(join(tmpdir(), "serve-")), "req_00000");
  writeRequest(dir, 16, 16);
  answerRequest(dir, null);
  const flow = readGrid(join(dir, "flow.srgr"));
  for (let i = 0; i < 16 * 16; i++) {
    const c = flow.values[3 * i + 2];
    assert.ok(c >= 0 && c <= 1);
  }
});

test("identical request served twice gives identical bytes", () => {
  const base = mkdtempSync(join(tmpdir(), "serve-"));
  const a = join(base, "req_a");
  const b = join(base, "req_b");
  writeRequest(a, 20, 20);
  writeRequest(b, 20, 20);
  answerRequest(a, null);
  answerRequest(b, null);
  assert.deepEqual(readFileSync(join(a, "flow.srgr")), readFileSync(join(b, "flow.srgr")));
});

test("mismatched dims get an error sidecar naming the violation", () => {
  const dir = join(mkdtempSync(join(tmpdir(), "serve-")), "req_00000");
  writeRequest(dir, 24, 32, 24, 16); // src grid disagrees with the sidecar
  answerRequest(dir, null);
  assert.ok(existsSync(join(dir, "response.ready")), "marker still written");
  assert.ok(!existsSync(join(dir, "flow.srgr")), "no flow for a bad request");
  const doc = JSON.parse(readFileSync(join(dir, "response.error.json"), "utf-8"));
  assert.match(doc.error, /24x16/);
});

test("unreadable payload never crashes the server", () => {
  const dir = join(mkdtempSync(join(tmpdir(), "serve-")), "req_00000");
  writeRequest(dir, 8, 8);
  writeFileSync(join(dir, "ref.srgr"), Buffer.from("garbage"));
  answerRequest(dir, null);
  assert.ok(existsSync(join(dir, "response.error.json")));
});
