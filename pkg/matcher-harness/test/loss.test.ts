import assert from "node:assert/strict";
import { test } from "node:test";
import { readFileSync, readdirSync } from "node:fs";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";

import {
  allLosses,
  lossConfidence,
  lossConfidenceGrad,
  lossDisparity,
  lossDisparityGrad,
  lossTotal,
} from "../src/loss.js";
import { readGrid } from "../src/srgr.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "..", "..", "fixtures");

function toF64(values: Float32Array): Float64Array {
  return Float64Array.from(values);
}

test("parity with the core implementation on shared fixtures", () => {
  const lossDir = join(FIXTURES, "loss");
  const cases = readdirSync(lossDir).sort();
  assert.ok(cases.length >= 3, "expected checked-in loss fixtures");
  for (const name of cases) {
    const caseDir = join(lossDir, name);
    const dHat = toF64(readGrid(join(caseDir, "dhat.srgr")).values);
    const d = toF64(readGrid(join(caseDir, "d.srgr")).values);
    const c = toF64(readGrid(join(caseDir, "c.srgr")).values);
    const cHat = toF64(readGrid(join(caseDir, "chat.srgr")).values);
    const expected = JSON.parse(readFileSync(join(caseDir, "expected.json"), "utf-8"));
    const got = allLosses(dHat, d, cHat, c, { weight: expected.weight });
    const relDiff = (a: number, b: number) => Math.abs(a - b) / Math.max(Math.abs(b), 1e-30);
    assert.ok(relDiff(got.disparity, expected.loss_disparity) < 1e-5, `${name}: Ld`);
    assert.ok(relDiff(got.confidence, expected.loss_confidence) < 1e-5, `${name}: Lc`);
    assert.ok(relDiff(got.total, expected.loss_total) < 1e-5, `${name}: L`);
  }
});

test("confidence loss of a half prediction is ln 2", () => {
  const n = 9;
  const cHat = new Float64Array(n).fill(0.5);
  const c = new Float64Array(n).fill(1);
  assert.ok(Math.abs(lossConfidence(cHat, c) - Math.log(2)) < 1e-12);
});

test("zero weight reduces the total to the disparity term", () => {
  assert.equal(lossTotal(2.5, 123.0, { weight: 0 }), 2.5);
});

function centralDifference(f: (x: Float64Array) => number, x: Float64Array, h = 1e-5): Float64Array {
  const grad = new Float64Array(x.length);
  for (let i = 0; i < x.length; i++) {
    const orig = x[i];
    x[i] = orig + h;
    const plus = f(x);
    x[i] = orig - h;
    const minus = f(x);
    x[i] = orig;
    grad[i] = (plus - minus) / (2 * h);
  }
  return grad;
}

test("disparity gradient matches central differences on a 4x4 toy", () => {
  const n = 16;
  const dHat = new Float64Array(2 * n);
  const d = new Float64Array(2 * n);
  const c = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    c[i] = i % 3 === 0 ? 0 : 1;
    dHat[2 * i] = Math.sin(i) * 2 + 0.7;
    dHat[2 * i + 1] = Math.cos(i) - 1.3;
    d[2 * i] = Math.sin(i + 1);
    d[2 * i + 1] = Math.cos(i + 2);
  }
  const analytic = lossDisparityGrad(dHat, d, c);
  const numeric = centralDifference((x) => lossDisparity(x, d, c), dHat);
  for (let i = 0; i < analytic.length; i++) {
    const scale = Math.max(Math.abs(numeric[i]), 1e-6);
    assert.ok(
      Math.abs(analytic[i] - numeric[i]) / scale < 1e-4,
      `component ${i}: ${analytic[i]} vs ${numeric[i]}`,
    );
  }
});

test("confidence gradient matches central differences on a 4x4 toy", () => {
  const n = 16;
  const cHat = new Float64Array(n);
  const c = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    cHat[i] = 0.1 + 0.05 * i / 1.0;
    c[i] = i % 2;
  }
  const analytic = lossConfidenceGrad(cHat, c);
  const numeric = centralDifference((x) => lossConfidence(x, c), cHat);
  for (let i = 0; i < n; i++) {
    const scale = Math.max(Math.abs(numeric[i]), 1e-6);
    assert.ok(
      Math.abs(analytic[i] - numeric[i]) / scale < 1e-4,
      `component ${i}: ${analytic[i]} vs ${numeric[i]}`,
    );
  }
});
