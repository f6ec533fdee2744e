import * as fs from 'fs';
import * as path from 'path';
import { GrayImage, readGrayPng } from './png';

export type Target = 'bone' | 'tooth' | 'cej';

export interface CaseImage {
  caseDir: string;
  imageId: string;
  width: number;
  height: number;
  bone: Uint8Array; // 0/1
  tooth: Uint8Array; // instance labels
  cej: Uint8Array; // 0/1
  manifestEntry: Record<string, unknown>;
}

export interface Sample {
  x: Float32Array; // composite input, size*size
  y: Uint8Array; // target mask, size*size, 0/1
  image: CaseImage;
}

export interface Corpus {
  size: number;
  target: Target;
  train: Sample[];
  val: Sample[];
  test: Sample[];
}

/** Small deterministic PRNG (mulberry32): seeds all data-side randomness. */
export function makeRng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function loadCaseDir(caseDir: string): CaseImage[] {
  const manifest = JSON.parse(
    fs.readFileSync(path.join(caseDir, 'case.json'), 'utf8'),
  );
  const images: CaseImage[] = [];
  for (const entry of manifest.images) {
    const bone = readGrayPng(path.join(caseDir, entry.bone_mask));
    const tooth = readGrayPng(path.join(caseDir, entry.tooth_mask));
    const cej = readGrayPng(path.join(caseDir, entry.cej_mask));
    images.push({
      caseDir,
      imageId: entry.image_id,
      width: bone.width,
      height: bone.height,
      bone: binarize(bone),
      tooth: tooth.data.slice(),
      cej: binarize(cej),
      manifestEntry: entry,
    });
  }
  images.sort((a, b) => a.imageId.localeCompare(b.imageId));
  return images;
}

function binarize(img: GrayImage): Uint8Array {
  const out = new Uint8Array(img.data.length);
  for (let i = 0; i < out.length; i++) out[i] = img.data[i] >= 128 ? 1 : 0;
  return out;
}

export function resizeNearest(
  src: Uint8Array,
  w: number,
  h: number,
  outW: number,
  outH: number,
): Uint8Array {
  const out = new Uint8Array(outW * outH);
  for (let j = 0; j < outH; j++) {
    const sj = Math.min(h - 1, Math.floor((j * h) / outH));
    for (let i = 0; i < outW; i++) {
      const si = Math.min(w - 1, Math.floor((i * w) / outW));
      out[j * outW + i] = src[sj * w + si];
    }
  }
  return out;
}

/**
 * Downsample a mask so a cell is set when any covered source pixel is set.
 * Thin curves (the CEJ line) survive this; nearest sampling drops them.
 */
export function resizeMax(
  src: Uint8Array,
  w: number,
  h: number,
  outW: number,
  outH: number,
): Uint8Array {
  const out = new Uint8Array(outW * outH);
  for (let j = 0; j < outH; j++) {
    const j0 = Math.floor((j * h) / outH);
    const j1 = Math.max(j0 + 1, Math.floor(((j + 1) * h) / outH));
    for (let i = 0; i < outW; i++) {
      const i0 = Math.floor((i * w) / outW);
      const i1 = Math.max(i0 + 1, Math.floor(((i + 1) * w) / outW));
      let v = 0;
      for (let y = j0; y < j1 && !v; y++) {
        for (let x = i0; x < i1; x++) {
          if (src[y * w + x]) {
            v = 1;
            break;
          }
        }
      }
      out[j * outW + i] = v;
    }
  }
  return out;
}

/** Stable 32-bit hash, used to derive per-image composite seeds. */
export function hashString(text: string): number {
  let h = 2166136261 >>> 0;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 16777619);
  }
  return h >>> 0;
}

const BONE_LEVEL = 0.3;
const TOOTH_LEVEL = 0.45;
const CEJ_BUMP = 0.07;
const NOISE_LEVEL = 0.06;

/**
 * Build the model input: a pseudo-radiograph composited from the masks
 * (bone and teeth overlap additively) plus deterministic speckle noise
 * keyed to the image id. The CEJ is only a faint brightness bump, under
 * the noise amplitude per pixel, so finding it requires integrating
 * along the curve rather than thresholding single pixels. Masks resample
 * to size x size first, making the recipe resolution-free.
 */
export function composite(image: CaseImage, size: number): Float32Array {
  const bone = resizeNearest(image.bone, image.width, image.height, size, size);
  const tooth = resizeNearest(image.tooth, image.width, image.height, size, size);
  const cej = resizeMax(image.cej, image.width, image.height, size, size);
  const rng = makeRng(hashString(image.imageId) ^ 0x5eed);
  const out = new Float32Array(size * size);
  for (let i = 0; i < out.length; i++) {
    let v = 0;
    if (bone[i]) v += BONE_LEVEL;
    if (tooth[i] !== 0) v += TOOTH_LEVEL;
    if (cej[i]) v += CEJ_BUMP;
    v += (rng() - 0.5) * 2 * NOISE_LEVEL;
    out[i] = Math.min(1, Math.max(0, v));
  }
  return out;
}

export function targetMask(image: CaseImage, target: Target, size: number): Uint8Array {
  if (target === 'cej') {
    return resizeMax(image.cej, image.width, image.height, size, size);
  }
  const raw = target === 'bone' ? image.bone : image.tooth;
  const resized = resizeNearest(raw, image.width, image.height, size, size);
  const out = new Uint8Array(size * size);
  for (let i = 0; i < out.length; i++) out[i] = resized[i] !== 0 ? 1 : 0;
  return out;
}

/** Seeded 70/10/20 split over the pooled images of all cases. */
export function buildCorpus(
  caseDirs: string[],
  target: Target,
  size: number,
  seed: number,
): Corpus {
  const images = caseDirs.flatMap(loadCaseDir);
  if (images.length < 5) {
    throw new Error(`need at least 5 images for a 70/10/20 split, got ${images.length}`);
  }
  const rng = makeRng(seed);
  const order = images.map((_, i) => i);
  for (let i = order.length - 1; i > 0; i--) {
    const j = Math.floor(rng() * (i + 1));
    [order[i], order[j]] = [order[j], order[i]];
  }
  const nTrain = Math.round(order.length * 0.7);
  const nVal = Math.max(1, Math.round(order.length * 0.1));
  const toSamples = (idx: number[]) =>
    idx.map((k) => ({
      x: composite(images[k], size),
      y: targetMask(images[k], target, size),
      image: images[k],
    }));
  return {
    size,
    target,
    train: toSamples(order.slice(0, nTrain)),
    val: toSamples(order.slice(nTrain, nTrain + nVal)),
    test: toSamples(order.slice(nTrain + nVal)),
  };
}
