import { execFileSync } from 'child_process';
import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import { buildCorpus, loadCaseDir } from '../src/data';
import { buildModel } from '../src/models';
import { predictMasks } from '../src/predict';
import { readGrayPng } from '../src/png';
import { train } from '../src/train';
import { makePhantomCase } from './helpers';

const SIZE = 32;
let tmp: string;
let caseDir: string;

beforeAll(async () => {
  await tf.setBackend('cpu');
  await tf.ready();
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'segtrain-export-'));
  caseDir = path.join(tmp, 'case');
  makePhantomCase(caseDir, { seed: 31, nTeeth: 6, mix: '0=0.5,III=0.5', nImages: 6 });
}, 120_000);

afterAll(() => {
  fs.rmSync(tmp, { recursive: true, force: true });
});

describe('predictMasks export format', () => {
  it('pass-through export reproduces the source case and re-ingests cleanly', () => {
    const outDir = path.join(tmp, 'passthrough');
    const manifestPath = predictMasks({
      caseDir, outDir, models: {}, size: SIZE, caseId: 'passthrough',
    });
    const manifest = JSON.parse(fs.readFileSync(manifestPath, 'utf8'));
    expect(manifest.case_id).toBe('passthrough');
    const source = loadCaseDir(caseDir);
    const exported = loadCaseDir(outDir);
    expect(exported.length).toBe(source.length);
    for (let i = 0; i < source.length; i++) {
      expect(Buffer.from(exported[i].bone).equals(Buffer.from(source[i].bone))).toBe(true);
      expect(Buffer.from(exported[i].tooth).equals(Buffer.from(source[i].tooth))).toBe(true);
      expect(Buffer.from(exported[i].cej).equals(Buffer.from(source[i].cej))).toBe(true);
    }
    // the measurement engine accepts the exported case as-is
    const report = path.join(tmp, 'passthrough-report.json');
    execFileSync('rblkit', ['analyze', manifestPath, '--out', report], { stdio: 'pipe' });
    const parsed = JSON.parse(fs.readFileSync(report, 'utf8'));
    expect(parsed.kind).toBe('analysis');
    expect(parsed.images.length).toBe(source.length);
  }, 120_000);

  it('model-backed export closes the loop through eval-seg', async () => {
    // overfit a tiny model on this case's bone masks, then export and score
    const corpus = buildCorpus([caseDir], 'bone', SIZE, 5);
    const all = [...corpus.train, ...corpus.val, ...corpus.test];
    const overfit = { ...corpus, train: all, val: [], test: [] };
    const model = buildModel(
      { kind: 'plain-unet', kernelSize: 3 },
      { inputSize: SIZE, widthMultiplier: 0.0625, seed: 3 },
    );
    await train(model, overfit, {
      epochs: 12, batchSize: 4, learningRate: 3e-3, target: 'bone', seed: 6, size: SIZE,
    });
    const outDir = path.join(tmp, 'model-export');
    const manifestPath = predictMasks({
      caseDir, outDir, models: { bone: model }, size: SIZE, caseId: 'model-export',
    });
    model.dispose();

    // predicted bone PNGs exist, are binary, and are nontrivial
    const exported = JSON.parse(fs.readFileSync(manifestPath, 'utf8'));
    for (const entry of exported.images) {
      const png = readGrayPng(path.join(outDir, entry.bone_mask));
      const values = new Set(png.data);
      expect([...values].every((v) => v === 0 || v === 255)).toBe(true);
      expect(png.data.some((v) => v === 255)).toBe(true);
    }

    // the engine's seg evaluation scores prediction vs reference
    const predDir = path.join(tmp, 'eval-pred');
    const refDir = path.join(tmp, 'eval-ref');
    fs.mkdirSync(predDir, { recursive: true });
    fs.mkdirSync(refDir, { recursive: true });
    for (const entry of exported.images) {
      const name = path.basename(entry.bone_mask);
      fs.copyFileSync(path.join(outDir, entry.bone_mask), path.join(predDir, name));
      fs.copyFileSync(path.join(caseDir, 'masks', name), path.join(refDir, name));
    }
    const evalOut = path.join(tmp, 'eval-seg.json');
    execFileSync(
      'rblkit',
      ['eval', predDir, refDir, '--mode', 'seg', '--out', evalOut],
      { stdio: 'pipe' },
    );
    const report = JSON.parse(fs.readFileSync(evalOut, 'utf8'));
    expect(report.kind).toBe('eval-seg');
    expect(report.means.dice).toBeGreaterThan(0.7); // overfit on simple masks
    expect(report.means.dice).toBeLessThanOrEqual(1.0);
  }, 600_000);

  it('all-background prediction exercises the degenerate-score path', () => {
    // an untrained head biased to zero produces empty masks; eval-seg
    // reports dice 0 against nonempty references (no crash)
    const outDir = path.join(tmp, 'empty-export');
    const model = buildModel(
      { kind: 'plain-unet', kernelSize: 3 },
      { inputSize: SIZE, widthMultiplier: 0.0625, seed: 8 },
    );
    // force the sigmoid head's bias far negative: predictions ~ 0
    const weights = model.getWeights();
    const last = weights[weights.length - 1];
    weights[weights.length - 1] = tf.fill(last.shape, -30);
    model.setWeights(weights);
    const manifestPath = predictMasks({
      caseDir, outDir, models: { cej: model }, size: SIZE, caseId: 'empty',
    });
    model.dispose();
    const exported = JSON.parse(fs.readFileSync(manifestPath, 'utf8'));
    const png = readGrayPng(path.join(outDir, exported.images[0].cej_mask));
    expect(png.data.every((v) => v === 0)).toBe(true);
  }, 120_000);
});
