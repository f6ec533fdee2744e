/**
 * Training criteria at full scale. Gated behind RUN_SLOW=1: these runs
 * take tens of minutes. Each experiment enforces its wall-clock budget by
 * projection, so an infeasible configuration fails fast with the
 * measured step time in the message instead of running for hours.
 */

import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import { ensureCorpus, runExperiment } from '../../src/experiment';

const BUDGET_S = 30 * 60;
let tmp: string;
let corpusDir: string;

beforeAll(() => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'segtrain-slow-'));
  corpusDir = path.join(tmp, 'corpus');
  ensureCorpus(corpusDir, 15, 7); // 15 full-mouth cases, ~210 images
});

afterAll(() => {
  fs.rmSync(tmp, { recursive: true, force: true });
});

describe('training criteria', () => {
  it(
    'reference-width unet-resnet34 reaches bone+tooth DSC >= 0.85 within 30 min',
    async () => {
      // the stated criterion at the reference channel ladder; on hardware
      // without an accelerated conv backend the budget guard fails this
      // with the projected time, which is the honest outcome
      const started = Date.now();
      const bone = await runExperiment({
        target: 'bone', variant: 'unet-resnet34', size: 64, width: 1,
        epochs: 3, cases: 15, batch: 8, lr: 1e-3, seed: 1,
        corpusDir, out: path.join(tmp, 'ref-bone'),
        budgetS: BUDGET_S, startedAtMs: started,
      });
      const tooth = await runExperiment({
        target: 'tooth', variant: 'unet-resnet34', size: 64, width: 1,
        epochs: 3, cases: 15, batch: 8, lr: 1e-3, seed: 2,
        corpusDir, out: path.join(tmp, 'ref-tooth'),
        budgetS: BUDGET_S, startedAtMs: started,
      });
      expect(bone.dice).toBeGreaterThanOrEqual(0.85);
      expect(tooth.dice).toBeGreaterThanOrEqual(0.85);
      expect((Date.now() - started) / 1000).toBeLessThan(BUDGET_S);
    },
    2 * BUDGET_S * 1000,
  );

  it(
    'width-scaled unet-resnet34 reaches bone+tooth DSC >= 0.85 within 30 min',
    async () => {
      // the same pipeline at the width this hardware trains in budget
      // (~300 optimizer steps per model; see the ledgered runs)
      const started = Date.now();
      const bone = await runExperiment({
        target: 'bone', variant: 'unet-resnet34', size: 32, width: 0.0625,
        epochs: 6, cases: 15, batch: 4, lr: 3e-3, seed: 1,
        corpusDir, out: path.join(tmp, 'small-bone'),
        budgetS: BUDGET_S, startedAtMs: started,
      });
      const tooth = await runExperiment({
        target: 'tooth', variant: 'unet-resnet34', size: 32, width: 0.0625,
        epochs: 6, cases: 15, batch: 4, lr: 3e-3, seed: 2,
        corpusDir, out: path.join(tmp, 'small-tooth'),
        budgetS: BUDGET_S, startedAtMs: started,
      });
      expect(bone.dice).toBeGreaterThanOrEqual(0.85);
      expect(tooth.dice).toBeGreaterThanOrEqual(0.85);
      expect((Date.now() - started) / 1000).toBeLessThan(BUDGET_S);
    },
    2 * BUDGET_S * 1000,
  );

  it(
    'CEJ DSC of the 7x7 plain U-Net exceeds the 3x3 variant on the same split',
    async () => {
      const shared = {
        target: 'cej' as const, size: 32, width: 0.0625, epochs: 8,
        cases: 6, batch: 4, lr: 3e-3, seed: 5, corpusDir,
        budgetS: BUDGET_S, startedAtMs: Date.now(),
      };
      const k3 = await runExperiment({
        ...shared, variant: 'plain-unet-k3', out: path.join(tmp, 'cej-k3'),
      });
      const k7 = await runExperiment({
        ...shared, variant: 'plain-unet-k7', out: path.join(tmp, 'cej-k7'),
        startedAtMs: Date.now(),
      });
      expect(k7.dice).toBeGreaterThan(k3.dice);
    },
    2 * BUDGET_S * 1000,
  );
});
