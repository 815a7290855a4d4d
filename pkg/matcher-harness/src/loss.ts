/**
 * Training losses over dense disparity/confidence grids, with analytic
 * gradients for the optimizer.
 *
 * Disparity: mean confidence-masked L2 norm, normalized by the full pixel
 * count.  Confidence: binary cross-entropy, negated so it is bounded below
 * (predictions clamped to [1e-7, 1 - 1e-7]).  Total: Ld + weight * Lc.
 */

const EPS = 1e-7;

export interface LossValues {
  disparity: number;
  confidence: number;
  total: number;
}

export interface LossConfig {
  weight: number; // confidence-loss weight in the total
}

export const defaultLossConfig: LossConfig = { weight: 0.01 };

/** d arrays are interleaved (dRow, dCol) pairs, length 2*n; c has length n. */
export function lossDisparity(dHat: Float64Array, d: Float64Array, c: Float64Array): number {
  const n = c.length;
  let sum = 0;
  for (let i = 0; i < n; i++) {
    if (c[i] > 0) {
      const dr = dHat[2 * i] - d[2 * i];
      const dc = dHat[2 * i + 1] - d[2 * i + 1];
      sum += c[i] * Math.hypot(dr, dc);
    }
  }
  return sum / n;
}

/** Gradient of lossDisparity with respect to dHat (same layout as dHat). */
export function lossDisparityGrad(
  dHat: Float64Array,
  d: Float64Array,
  c: Float64Array,
): Float64Array {
  const n = c.length;
  const grad = new Float64Array(2 * n);
  for (let i = 0; i < n; i++) {
    if (c[i] > 0) {
      const dr = dHat[2 * i] - d[2 * i];
      const dc = dHat[2 * i + 1] - d[2 * i + 1];
      const norm = Math.hypot(dr, dc);
      if (norm > 1e-12) {
        grad[2 * i] = (c[i] * dr) / (norm * n);
        grad[2 * i + 1] = (c[i] * dc) / (norm * n);
      }
    }
  }
  return grad;
}

export function lossConfidence(cHat: Float64Array, c: Float64Array): number {
  const n = c.length;
  let sum = 0;
  for (let i = 0; i < n; i++) {
    const p = Math.min(Math.max(cHat[i], EPS), 1 - EPS);
    sum += c[i] * Math.log(p) + (1 - c[i]) * Math.log(1 - p);
  }
  return -sum / n;
}

/** Gradient of lossConfidence with respect to cHat; zero in clamped zones. */
export function lossConfidenceGrad(cHat: Float64Array, c: Float64Array): Float64Array {
  const n = c.length;
  const grad = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    if (cHat[i] <= EPS || cHat[i] >= 1 - EPS) {
      continue; // clamped: locally constant
    }
    const p = cHat[i];
    grad[i] = -(c[i] / p - (1 - c[i]) / (1 - p)) / n;
  }
  return grad;
}

export function lossTotal(ld: number, lc: number, cfg: LossConfig = defaultLossConfig): number {
  return ld + cfg.weight * lc;
}

export function allLosses(
  dHat: Float64Array,
  d: Float64Array,
  cHat: Float64Array,
  c: Float64Array,
  cfg: LossConfig = defaultLossConfig,
): LossValues {
  const disparity = lossDisparity(dHat, d, c);
  const confidence = lossConfidence(cHat, c);
  return { disparity, confidence, total: lossTotal(disparity, confidence, cfg) };
}
