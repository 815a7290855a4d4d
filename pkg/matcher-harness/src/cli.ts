/**
 * Command line:
 *
 *   serve <queue_dir> [--checkpoint best.json] [--once]
 *       Consume match requests.  Without a checkpoint the server answers
 *       in echo mode (zero flow, confidence 1) for any request size.
 *
 *   train --dataset <dir> --out <dir> [--epochs N] [--batch N]
 *         [--other-lr X] [--encoder-lr X] [--weight X] [--seed N]
 *       Fine-tune the bundled predictor on a dataset in the standard
 *       layout; writes metrics.jsonl, last.json and best.json.
 */

import { readFileSync } from "node:fs";

import { loadSplit } from "./dataset.js";
import { CoarseFieldModel } from "./model.js";
import { serve } from "./server.js";
import { train, defaultTrainConfig } from "./train.js";

function parseFlags(argv: string[]): { positional: string[]; flags: Map<string, string | boolean> } {
  const positional: string[] = [];
  const flags = new Map<string, string | boolean>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg.startsWith("--")) {
      const key = arg.slice(2);
      if (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
        flags.set(key, argv[++i]);
      } else {
        flags.set(key, true);
      }
    } else {
      positional.push(arg);
    }
  }
  return { positional, flags };
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  const { positional, flags } = parseFlags(rest);

  if (command === "serve") {
    const queueDir = positional[0];
    if (!queueDir) {
      console.error("serve: queue directory required");
      return 2;
    }
    let predictor = null;
    const checkpoint = flags.get("checkpoint");
    if (typeof checkpoint === "string") {
      try {
        predictor = CoarseFieldModel.fromJSON(JSON.parse(readFileSync(checkpoint, "utf-8")));
      } catch (err) {
        console.error(`serve: cannot load checkpoint: ${(err as Error).message}`);
        return 1;
      }
    }
    await serve({ queueDir, predictor, once: flags.get("once") === true });
    return 0;
  }

  if (command === "train") {
    const dataset = flags.get("dataset");
    const out = flags.get("out");
    if (typeof dataset !== "string" || typeof out !== "string") {
      console.error("train: --dataset and --out are required");
      return 2;
    }
    const num = (key: string, fallback: number) => {
      const v = flags.get(key);
      return typeof v === "string" ? Number(v) : fallback;
    };
    const trainSamples = loadSplit(dataset, "train");
    const valSamples = loadSplit(dataset, "val");
    if (!trainSamples.length) {
      console.error(`train: no samples under ${dataset}/train`);
      return 1;
    }
    const { history } = train(trainSamples, valSamples, {
      epochs: num("epochs", defaultTrainConfig.epochs),
      batchSize: num("batch", defaultTrainConfig.batchSize),
      otherLr: num("other-lr", defaultTrainConfig.otherLr),
      encoderLr: num("encoder-lr", defaultTrainConfig.encoderLr),
      weight: num("weight", defaultTrainConfig.weight),
      seed: num("seed", defaultTrainConfig.seed),
    }, out);
    const last = history[history.length - 1];
    console.error(
      `train: done, epochs=${history.length} ` +
      `L=${last.trainTotal.toFixed(6)} Ld=${last.trainDisparity.toFixed(6)} ` +
      `Lc=${last.trainConfidence.toFixed(6)}`,
    );
    return 0;
  }

  console.error("usage: cli.js serve <queue_dir> [--checkpoint f] | train --dataset d --out o");
  return 2;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(err);
    process.exit(1);
  },
);
