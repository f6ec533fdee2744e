/**
 * End-to-end experiment driver: generate a phantom corpus with the
 * measurement engine's CLI, train one segmentation model, export the
 * held-out predictions, and score them with `rblkit eval --mode seg`.
 *
 *   npx tsx scripts/train_eval.ts --target bone --variant unet-resnet34 \
 *     --size 32 --width 0.125 --epochs 3 --cases 15 --out runs/bone
 *
 * --budget-s enforces a wall-clock budget: the run aborts as soon as the
 * projected completion time exceeds it.
 */

import { Target } from '../src/data';
import { runExperiment } from '../src/experiment';

function parseArgs() {
  const argv = process.argv.slice(2);
  const get = (name: string, fallback: string): string => {
    const k = argv.indexOf(`--${name}`);
    return k >= 0 ? argv[k + 1] : fallback;
  };
  return {
    target: get('target', 'bone') as Target,
    variant: get('variant', 'unet-resnet34'),
    size: Number(get('size', '32')),
    width: Number(get('width', '0.125')),
    epochs: Number(get('epochs', '3')),
    cases: Number(get('cases', '15')),
    batch: Number(get('batch', '8')),
    lr: Number(get('lr', '1e-3')),
    seed: Number(get('seed', '0')),
    corpusDir: get('corpus-dir', 'runs/corpus'),
    out: get('out', 'runs/latest'),
    budgetS: Number(get('budget-s', '0')),
  };
}

runExperiment({ ...parseArgs(), log: (line) => console.log(line) }).catch((err) => {
  console.error(String(err?.message ?? err));
  process.exit(1);
});
