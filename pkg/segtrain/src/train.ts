import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';
import { Corpus, Sample, Target, makeRng } from './data';
import { bceLoss } from './loss';
import { BuildOptions, Variant, buildModel, parseVariant, variantName } from './models';

export interface TrainConfig {
  epochs: number; // reference runs used 100; toy default 20
  batchSize: number; // reference runs used 8
  learningRate: number;
  target: Target;
  seed: number;
  size: number;
  widthMultiplier?: number;
}

export const TOY_DEFAULTS: Omit<TrainConfig, 'target'> = {
  epochs: 20,
  batchSize: 8,
  learningRate: 1e-3,
  seed: 0,
  size: 64,
};

export class DivergenceError extends Error {}

export interface TrainResult {
  history: number[]; // mean train loss per epoch
  valHistory: number[];
}

function toBatch(samples: Sample[], size: number): { x: tf.Tensor4D; y: tf.Tensor4D } {
  const n = samples.length;
  const xs = new Float32Array(n * size * size);
  const ys = new Float32Array(n * size * size);
  samples.forEach((s, k) => {
    xs.set(s.x, k * size * size);
    ys.set(s.y, k * size * size);
  });
  return {
    x: tf.tensor4d(xs, [n, size, size, 1]),
    y: tf.tensor4d(ys, [n, size, size, 1]),
  };
}

/**
 * Seeded Adam training on the corpus' train split with per-epoch
 * validation loss. Aborts with DivergenceError on a non-finite loss.
 */
export async function train(
  model: tf.LayersModel,
  corpus: Corpus,
  config: TrainConfig,
  onEpoch?: (epoch: number, loss: number, valLoss: number) => void,
  onStep?: (step: number, loss: number) => void,
): Promise<TrainResult> {
  if (config.epochs < 1 || config.batchSize < 1) {
    throw new Error('epochs and batchSize must be >= 1');
  }
  const optimizer = tf.train.adam(config.learningRate);
  const rng = makeRng(config.seed ^ 0x7aaedb);
  const history: number[] = [];
  const valHistory: number[] = [];
  const vars = model.trainableWeights.map(
    (w) => (w as unknown as { val: tf.Variable }).val,
  );
  let totalSteps = 0;

  for (let epoch = 0; epoch < config.epochs; epoch++) {
    const order = corpus.train.map((_, i) => i);
    for (let i = order.length - 1; i > 0; i--) {
      const j = Math.floor(rng() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }
    let epochLoss = 0;
    let nBatches = 0;
    for (let start = 0; start < order.length; start += config.batchSize) {
      const batchIdx = order.slice(start, start + config.batchSize);
      const { x, y } = toBatch(batchIdx.map((k) => corpus.train[k]), corpus.size);
      const lossVal = tf.tidy(() => {
        const { value, grads } = tf.variableGrads(
          () => bceLoss(y, model.apply(x, { training: true }) as tf.Tensor),
          vars,
        );
        optimizer.applyGradients(
          Object.entries(grads).map(([name, tensor]) => ({ name, tensor })),
        );
        return value.dataSync()[0];
      });
      x.dispose();
      y.dispose();
      if (!Number.isFinite(lossVal)) {
        throw new DivergenceError(
          `non-finite training loss at epoch ${epoch + 1}: ${lossVal}`,
        );
      }
      epochLoss += lossVal;
      nBatches += 1;
      totalSteps += 1;
      onStep?.(totalSteps, lossVal);
      await tf.nextFrame();
    }
    const meanLoss = epochLoss / nBatches;
    const valLoss = corpus.val.length ? evaluateLoss(model, corpus.val, corpus.size) : NaN;
    history.push(meanLoss);
    valHistory.push(valLoss);
    onEpoch?.(epoch + 1, meanLoss, valLoss);
  }
  optimizer.dispose();
  return { history, valHistory };
}

export function evaluateLoss(model: tf.LayersModel, samples: Sample[], size: number): number {
  let total = 0;
  for (let start = 0; start < samples.length; start += 8) {
    const { x, y } = toBatch(samples.slice(start, start + 8), size);
    const value = tf.tidy(() =>
      bceLoss(y, model.apply(x, { training: false }) as tf.Tensor).dataSync()[0],
    );
    total += value * Math.min(8, samples.length - start);
    x.dispose();
    y.dispose();
  }
  return total / samples.length;
}

export function predictBatch(
  model: tf.LayersModel,
  samples: Sample[],
  size: number,
): Float32Array[] {
  const out: Float32Array[] = [];
  for (let start = 0; start < samples.length; start += 8) {
    const { x } = toBatch(samples.slice(start, start + 8), size);
    const pred = tf.tidy(
      () => (model.apply(x, { training: false }) as tf.Tensor).dataSync() as Float32Array,
    );
    x.dispose();
    const n = Math.min(8, samples.length - start);
    for (let k = 0; k < n; k++) {
      out.push(pred.slice(k * size * size, (k + 1) * size * size));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: a JSON spec plus raw little-endian float32 weight bytes, so a
// reload reproduces the model bit for bit.
// ---------------------------------------------------------------------------

export interface CheckpointSpec {
  variant: string;
  inputSize: number;
  widthMultiplier: number;
  seed: number;
  target: Target;
  weights: Array<{ name: string; shape: number[] }>;
}

export function saveCheckpoint(
  model: tf.LayersModel,
  dir: string,
  meta: { variant: Variant; options: BuildOptions; target: Target },
): void {
  fs.mkdirSync(dir, { recursive: true });
  const weights = model.getWeights();
  const names = model.weights.map((w) => w.originalName);
  const spec: CheckpointSpec = {
    variant: variantName(meta.variant),
    inputSize: meta.options.inputSize,
    widthMultiplier: meta.options.widthMultiplier ?? 1,
    seed: meta.options.seed ?? 1234,
    target: meta.target,
    weights: weights.map((w, i) => ({ name: names[i], shape: w.shape.slice() })),
  };
  const totalFloats = weights.reduce((acc, w) => acc + w.size, 0);
  const bin = new Float32Array(totalFloats);
  let offset = 0;
  for (const w of weights) {
    bin.set(w.dataSync() as Float32Array, offset);
    offset += w.size;
  }
  fs.writeFileSync(path.join(dir, 'checkpoint.json'), JSON.stringify(spec, null, 2));
  fs.writeFileSync(path.join(dir, 'weights.bin'), Buffer.from(bin.buffer));
}

export function loadCheckpoint(dir: string): {
  model: tf.LayersModel;
  spec: CheckpointSpec;
} {
  const spec: CheckpointSpec = JSON.parse(
    fs.readFileSync(path.join(dir, 'checkpoint.json'), 'utf8'),
  );
  const model = buildModel(parseVariant(spec.variant), {
    inputSize: spec.inputSize,
    widthMultiplier: spec.widthMultiplier,
    seed: spec.seed,
  });
  const raw = fs.readFileSync(path.join(dir, 'weights.bin'));
  const bin = new Float32Array(raw.buffer, raw.byteOffset, raw.byteLength / 4);
  let offset = 0;
  const tensors = spec.weights.map((w) => {
    const size = w.shape.reduce((a, b) => a * b, 1);
    const t = tf.tensor(bin.slice(offset, offset + size), w.shape);
    offset += size;
    return t;
  });
  model.setWeights(tensors);
  tensors.forEach((t) => t.dispose());
  return { model, spec };
}
