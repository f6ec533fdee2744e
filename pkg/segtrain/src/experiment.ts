import { execFileSync } from 'child_process';
import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';
import { Target, buildCorpus } from './data';
import { buildModel, parseVariant } from './models';
import { writeGrayPng } from './png';
import { predictMask } from './predict';
import { saveCheckpoint, train } from './train';

export class BudgetExceeded extends Error {}

export interface ExperimentArgs {
  target: Target;
  variant: string;
  size: number;
  width: number;
  epochs: number;
  cases: number;
  batch: number;
  lr: number;
  seed: number;
  corpusDir: string;
  out: string;
  /** wall-clock budget in seconds; 0 disables the guard */
  budgetS: number;
  /** budget epoch (ms since Unix epoch); lets several runs share one clock */
  startedAtMs?: number;
  log?: (line: string) => void;
}

export interface ExperimentResult {
  dice: number;
  jaccard: number;
  pixelAccuracy: number;
  nTest: number;
  nTrain: number;
  elapsedS: number;
  history: number[];
}

/** Generate (or reuse) a corpus of full-mouth phantom cases via the CLI. */
export function ensureCorpus(corpusDir: string, nCases: number, seed: number): string[] {
  fs.mkdirSync(corpusDir, { recursive: true });
  const dirs: string[] = [];
  for (let k = 0; k < nCases; k++) {
    const dir = path.join(corpusDir, `case-${String(k).padStart(2, '0')}`);
    if (!fs.existsSync(path.join(dir, 'case.json'))) {
      execFileSync('rblkit', [
        'phantom', '--out', dir,
        '--seed', String(seed * 1000 + k),
        '--n-teeth', '28',
        '--age', String(30 + (k % 50)),
        '--mix', '0=0.4,I=0.2,II=0.2,III=0.2',
        '--case-id', `corpus-${k}`,
      ], { stdio: 'pipe' });
    }
    dirs.push(dir);
  }
  return dirs;
}

/**
 * Train one model on a phantom corpus, export held-out predictions, and
 * score them with the measurement engine's `eval --mode seg` command.
 */
export async function runExperiment(args: ExperimentArgs): Promise<ExperimentResult> {
  const log = args.log ?? (() => undefined);
  await tf.setBackend('cpu');
  await tf.ready();
  const started = args.startedAtMs ?? Date.now();

  const caseDirs = ensureCorpus(args.corpusDir, args.cases, args.seed);
  const corpus = buildCorpus(caseDirs, args.target, args.size, args.seed + 17);
  log(
    `corpus: ${corpus.train.length} train / ${corpus.val.length} val / ` +
    `${corpus.test.length} test images at ${args.size}px; target=${args.target}`,
  );

  const variant = parseVariant(args.variant);
  // start the head at the train split's class prior
  let positives = 0;
  let pixels = 0;
  for (const sample of corpus.train) {
    for (const v of sample.y) positives += v;
    pixels += sample.y.length;
  }
  const prior = Math.min(Math.max(positives / pixels, 1e-4), 1 - 1e-4);
  const model = buildModel(variant, {
    inputSize: args.size,
    widthMultiplier: args.width,
    seed: args.seed + 99,
    outputBiasLogit: Math.log(prior / (1 - prior)),
  });

  const stepsPerEpoch = Math.ceil(corpus.train.length / args.batch);
  const totalSteps = stepsPerEpoch * args.epochs;
  const trainStart = Date.now();
  const guardStep = (step: number) => {
    if (args.budgetS <= 0) return;
    const elapsed = (Date.now() - started) / 1000;
    const perStep = (Date.now() - trainStart) / 1000 / step;
    const projected = elapsed + (totalSteps - step) * perStep;
    if (projected > args.budgetS) {
      model.dispose();
      throw new BudgetExceeded(
        `projected ${projected.toFixed(0)}s exceeds the ${args.budgetS}s budget ` +
        `after ${step}/${totalSteps} steps (${perStep.toFixed(1)}s/step)`,
      );
    }
  };

  const result = await train(model, corpus, {
    epochs: args.epochs,
    batchSize: args.batch,
    learningRate: args.lr,
    target: args.target,
    seed: args.seed,
    size: args.size,
  }, (epoch, loss, valLoss) => {
    log(
      `epoch ${epoch}/${args.epochs}: loss ${loss.toFixed(2)} val ${valLoss.toFixed(2)} ` +
      `(${((Date.now() - started) / 1000).toFixed(0)}s)`,
    );
  }, guardStep);

  fs.mkdirSync(args.out, { recursive: true });
  saveCheckpoint(model, path.join(args.out, 'checkpoint'), {
    variant,
    options: { inputSize: args.size, widthMultiplier: args.width, seed: args.seed + 99 },
    target: args.target,
  });
  fs.writeFileSync(
    path.join(args.out, 'history.json'),
    JSON.stringify({ history: result.history, valHistory: result.valHistory }, null, 2),
  );

  const predDir = path.join(args.out, 'pred');
  const refDir = path.join(args.out, 'ref');
  fs.mkdirSync(predDir, { recursive: true });
  fs.mkdirSync(refDir, { recursive: true });
  for (const sample of corpus.test) {
    const image = sample.image;
    const mask = predictMask(model, image, args.size);
    const bytes = new Uint8Array(mask.length);
    for (let i = 0; i < mask.length; i++) bytes[i] = mask[i] ? 255 : 0;
    const name = `${path.basename(image.caseDir)}_${image.imageId}_${args.target}.png`;
    writeGrayPng(path.join(predDir, name), {
      width: image.width, height: image.height, data: bytes,
    });
    // reference as a binary mask; the tooth source PNG holds instance
    // labels, which must collapse to foreground for overlap scoring
    const refSource =
      args.target === 'bone' ? image.bone : args.target === 'cej' ? image.cej : image.tooth;
    const refBytes = new Uint8Array(refSource.length);
    for (let i = 0; i < refSource.length; i++) refBytes[i] = refSource[i] !== 0 ? 255 : 0;
    writeGrayPng(path.join(refDir, name), {
      width: image.width, height: image.height, data: refBytes,
    });
  }
  model.dispose();
  const evalOut = path.join(args.out, 'eval-seg.json');
  execFileSync('rblkit', ['eval', predDir, refDir, '--mode', 'seg', '--out', evalOut],
               { stdio: 'pipe' });
  const report = JSON.parse(fs.readFileSync(evalOut, 'utf8'));
  const elapsedS = (Date.now() - started) / 1000;
  const summary: ExperimentResult = {
    dice: report.means.dice,
    jaccard: report.means.jaccard,
    pixelAccuracy: report.means.pixel_accuracy,
    nTest: corpus.test.length,
    nTrain: corpus.train.length,
    elapsedS: Math.round(elapsedS),
    history: result.history,
  };
  fs.writeFileSync(
    path.join(args.out, 'summary.json'),
    JSON.stringify({ args: { ...args, log: undefined }, ...summary }, null, 2) + '\n',
  );
  log(
    `held-out DSC ${summary.dice.toFixed(4)} | jaccard ${summary.jaccard.toFixed(4)} ` +
    `| pixel-acc ${summary.pixelAccuracy.toFixed(4)} | ${summary.elapsedS}s total`,
  );
  return summary;
}
