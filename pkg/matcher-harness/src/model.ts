/**
 * Pluggable dense predictor: anything that maps a patch pair to a
 * displacement field and a confidence map can be served and trained.
 *
 * The bundled CoarseFieldModel is a deliberately small stand-in for a
 * neural matcher: a learnable coarse lattice of displacement vectors and
 * confidence logits, bilinearly upsampled to the patch size (confidence
 * through a logistic, so it always lands in [0, 1]).  It exists to
 * exercise the serving and fine-tuning machinery end to end; a real
 * network drops in behind the same interface.
 */

export interface Prediction {
  dHat: Float64Array; // interleaved (dRow, dCol), length 2*rows*cols
  cHat: Float64Array; // length rows*cols, in (0, 1)
}

export interface Predictor {
  readonly rows: number;
  readonly cols: number;
  predict(ref: Float32Array, src: Float32Array): Prediction;
}

export interface TrainablePredictor extends Predictor {
  parameters(): Float64Array[]; // mutable parameter groups
  /** Accumulate parameter gradients from loss gradients at the output. */
  backward(gradD: Float64Array, gradC: Float64Array): Float64Array[];
}

function sigmoid(x: number): number {
  return 1 / (1 + Math.exp(-x));
}

export class CoarseFieldModel implements TrainablePredictor {
  readonly rows: number;
  readonly cols: number;
  readonly gridRows: number;
  readonly gridCols: number;
  disp: Float64Array; // (gridRows*gridCols*2), interleaved
  logit: Float64Array; // (gridRows*gridCols)

  constructor(rows: number, cols: number, gridRows = 7, gridCols = 7) {
    this.rows = rows;
    this.cols = cols;
    this.gridRows = gridRows;
    this.gridCols = gridCols;
    this.disp = new Float64Array(gridRows * gridCols * 2);
    this.logit = new Float64Array(gridRows * gridCols);
  }

  parameters(): Float64Array[] {
    return [this.disp, this.logit];
  }

  /** Upsampling weights of pixel (r, c) onto the coarse lattice. */
  private corners(r: number, c: number) {
    const gr = (r / Math.max(this.rows - 1, 1)) * (this.gridRows - 1);
    const gc = (c / Math.max(this.cols - 1, 1)) * (this.gridCols - 1);
    const r0 = Math.min(Math.floor(gr), this.gridRows - 2);
    const c0 = Math.min(Math.floor(gc), this.gridCols - 2);
    const fr = gr - r0;
    const fc = gc - c0;
    return {
      idx: [
        r0 * this.gridCols + c0,
        r0 * this.gridCols + c0 + 1,
        (r0 + 1) * this.gridCols + c0,
        (r0 + 1) * this.gridCols + c0 + 1,
      ],
      w: [(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc), fr * fc],
    };
  }

  predict(_ref: Float32Array, _src: Float32Array): Prediction {
    const n = this.rows * this.cols;
    const dHat = new Float64Array(2 * n);
    const cHat = new Float64Array(n);
    for (let r = 0; r < this.rows; r++) {
      for (let c = 0; c < this.cols; c++) {
        const { idx, w } = this.corners(r, c);
        let dr = 0;
        let dc = 0;
        let lg = 0;
        for (let k = 0; k < 4; k++) {
          dr += w[k] * this.disp[2 * idx[k]];
          dc += w[k] * this.disp[2 * idx[k] + 1];
          lg += w[k] * this.logit[idx[k]];
        }
        const p = r * this.cols + c;
        dHat[2 * p] = dr;
        dHat[2 * p + 1] = dc;
        cHat[p] = sigmoid(lg);
      }
    }
    this.lastC = cHat;
    return { dHat, cHat };
  }

  private lastC: Float64Array | null = null;

  backward(gradD: Float64Array, gradC: Float64Array): Float64Array[] {
    if (!this.lastC) {
      throw new Error("backward before predict");
    }
    const gDisp = new Float64Array(this.disp.length);
    const gLogit = new Float64Array(this.logit.length);
    for (let r = 0; r < this.rows; r++) {
      for (let c = 0; c < this.cols; c++) {
        const p = r * this.cols + c;
        const { idx, w } = this.corners(r, c);
        const s = this.lastC[p];
        const dSigmoid = s * (1 - s);
        for (let k = 0; k < 4; k++) {
          gDisp[2 * idx[k]] += w[k] * gradD[2 * p];
          gDisp[2 * idx[k] + 1] += w[k] * gradD[2 * p + 1];
          gLogit[idx[k]] += w[k] * gradC[p] * dSigmoid;
        }
      }
    }
    return [gDisp, gLogit];
  }

  toJSON() {
    return {
      kind: "coarse-field",
      rows: this.rows,
      cols: this.cols,
      gridRows: this.gridRows,
      gridCols: this.gridCols,
      disp: Array.from(this.disp),
      logit: Array.from(this.logit),
    };
  }

  static fromJSON(doc: any): CoarseFieldModel {
    if (doc.kind !== "coarse-field") {
      throw new Error(`unknown checkpoint kind ${doc.kind}`);
    }
    const model = new CoarseFieldModel(doc.rows, doc.cols, doc.gridRows, doc.gridCols);
    model.disp.set(doc.disp);
    model.logit.set(doc.logit);
    return model;
  }
}

/** Zero displacement at full confidence; the protocol conformance fixture. */
export class EchoPredictor implements Predictor {
  constructor(readonly rows: number, readonly cols: number) {}

  predict(): Prediction {
    const n = this.rows * this.cols;
    const cHat = new Float64Array(n).fill(1);
    return { dHat: new Float64Array(2 * n), cHat };
  }
}
