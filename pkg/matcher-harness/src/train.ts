/**
 * Fine-tuning loop: per step predict (dHat, cHat) for a small batch of
 * patch pairs, evaluate L = Ld + weight * Lc, backpropagate the analytic
 * loss gradients into the predictor, and step Adam.  Two learning-rate
 * groups mirror the usual encoder / everything-else split; the bundled
 * field model has no encoder, so its parameters all ride the second rate.
 *
 * Per epoch the mean training losses (and validation, when present) go to
 * metrics.jsonl; the best-validation checkpoint is kept alongside the last.
 */

import { writeFileSync, appendFileSync, mkdirSync } from "node:fs";
import { join } from "node:path";

import { Sample } from "./dataset.js";
import { allLosses, lossConfidenceGrad, lossDisparityGrad, LossConfig } from "./loss.js";
import { CoarseFieldModel } from "./model.js";

export interface TrainConfig {
  encoderLr: number;
  otherLr: number;
  batchSize: number;
  weight: number; // confidence-loss weight
  epochs: number;
  seed: number;
  gridRows: number;
  gridCols: number;
}

export const defaultTrainConfig: TrainConfig = {
  encoderLr: 1e-6,
  otherLr: 2e-5,
  batchSize: 2,
  weight: 0.01,
  epochs: 31,
  seed: 0,
  gridRows: 7,
  gridCols: 7,
};

/** Deterministic linear-congruential shuffle (Fisher-Yates). */
export function seededShuffle<T>(items: T[], seed: number): T[] {
  const out = items.slice();
  let state = (seed >>> 0) || 1;
  const next = () => {
    state = (Math.imul(state, 1664525) + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(next() * (i + 1));
    [out[i], out[j]] = [out[j], out[i]];
  }
  return out;
}

class Adam {
  private m: Float64Array[];
  private v: Float64Array[];
  private t = 0;

  constructor(private params: Float64Array[], private lr: number[]) {
    this.m = params.map((p) => new Float64Array(p.length));
    this.v = params.map((p) => new Float64Array(p.length));
  }

  step(grads: Float64Array[]): void {
    this.t += 1;
    const b1 = 0.9;
    const b2 = 0.999;
    const eps = 1e-8;
    for (let g = 0; g < this.params.length; g++) {
      const p = this.params[g];
      const m = this.m[g];
      const v = this.v[g];
      const lr = this.lr[g];
      for (let i = 0; i < p.length; i++) {
        m[i] = b1 * m[i] + (1 - b1) * grads[g][i];
        v[i] = b2 * v[i] + (1 - b2) * grads[g][i] * grads[g][i];
        const mHat = m[i] / (1 - b1 ** this.t);
        const vHat = v[i] / (1 - b2 ** this.t);
        p[i] -= (lr * mHat) / (Math.sqrt(vHat) + eps);
      }
    }
  }
}

export interface EpochRecord {
  epoch: number;
  trainTotal: number;
  trainDisparity: number;
  trainConfidence: number;
  valTotal: number | null;
}

function evaluate(model: CoarseFieldModel, samples: Sample[], cfg: LossConfig) {
  let total = 0;
  let ld = 0;
  let lc = 0;
  for (const s of samples) {
    const pred = model.predict(s.ref, s.src);
    const losses = allLosses(pred.dHat, s.d, pred.cHat, s.c, cfg);
    total += losses.total;
    ld += losses.disparity;
    lc += losses.confidence;
  }
  const n = Math.max(samples.length, 1);
  return { total: total / n, disparity: ld / n, confidence: lc / n };
}

export function train(
  trainSamples: Sample[],
  valSamples: Sample[],
  config: Partial<TrainConfig> = {},
  outDir?: string,
): { model: CoarseFieldModel; history: EpochRecord[] } {
  const cfg = { ...defaultTrainConfig, ...config };
  if (trainSamples.length === 0) {
    throw new Error("no training samples");
  }
  const { rows, cols } = trainSamples[0];
  for (const s of [...trainSamples, ...valSamples]) {
    if (s.rows !== rows || s.cols !== cols) {
      throw new Error(`sample ${s.id} dims ${s.rows}x${s.cols} differ from ${rows}x${cols}`);
    }
  }
  const model = new CoarseFieldModel(rows, cols, cfg.gridRows, cfg.gridCols);
  // one optimizer group per parameter tensor, all on the non-encoder rate
  const optimizer = new Adam(model.parameters(), model.parameters().map(() => cfg.otherLr));
  const lossCfg: LossConfig = { weight: cfg.weight };

  if (outDir) {
    mkdirSync(outDir, { recursive: true });
    writeFileSync(join(outDir, "metrics.jsonl"), "");
  }

  const history: EpochRecord[] = [];
  let bestVal = Infinity;
  for (let epoch = 1; epoch <= cfg.epochs; epoch++) {
    const order = seededShuffle(trainSamples, cfg.seed + epoch);
    for (let start = 0; start < order.length; start += cfg.batchSize) {
      const batch = order.slice(start, start + cfg.batchSize);
      const grads = model.parameters().map((p) => new Float64Array(p.length));
      for (const s of batch) {
        const pred = model.predict(s.ref, s.src);
        const gD = lossDisparityGrad(pred.dHat, s.d, s.c);
        const gC = lossConfidenceGrad(pred.cHat, s.c);
        for (let i = 0; i < gC.length; i++) {
          gC[i] *= cfg.weight;
        }
        const paramGrads = model.backward(gD, gC);
        for (let g = 0; g < grads.length; g++) {
          for (let i = 0; i < grads[g].length; i++) {
            grads[g][i] += paramGrads[g][i] / batch.length;
          }
        }
      }
      optimizer.step(grads);
    }

    const trainLoss = evaluate(model, trainSamples, lossCfg);
    const valLoss = valSamples.length ? evaluate(model, valSamples, lossCfg) : null;
    const record: EpochRecord = {
      epoch,
      trainTotal: trainLoss.total,
      trainDisparity: trainLoss.disparity,
      trainConfidence: trainLoss.confidence,
      valTotal: valLoss ? valLoss.total : null,
    };
    history.push(record);
    if (outDir) {
      appendFileSync(join(outDir, "metrics.jsonl"), JSON.stringify(record) + "\n");
      writeFileSync(join(outDir, "last.json"), JSON.stringify(model.toJSON()));
      if (valLoss && valLoss.total < bestVal) {
        bestVal = valLoss.total;
        writeFileSync(join(outDir, "best.json"), JSON.stringify(model.toJSON()));
      }
    }
  }
  if (outDir && !valSamples.length) {
    writeFileSync(join(outDir, "best.json"), JSON.stringify(model.toJSON()));
  }
  return { model, history };
}
