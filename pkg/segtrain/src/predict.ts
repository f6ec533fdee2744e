import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';
import { CaseImage, Target, composite, loadCaseDir } from './data';
import { writeGrayPng } from './png';

export interface PredictOptions {
  caseDir: string;
  outDir: string;
  models: Partial<Record<Target, tf.LayersModel>>;
  size: number; // model input size; outputs are resampled to native size
  caseId?: string;
}

export function predictMask(
  model: tf.LayersModel,
  image: CaseImage,
  size: number,
): Uint8Array {
  const x = tf.tensor4d(composite(image, size), [1, size, size, 1]);
  const probs = tf.tidy(
    () => (model.apply(x, { training: false }) as tf.Tensor).dataSync() as Float32Array,
  );
  x.dispose();
  // bilinear upsampling of the probability grid (cell centers), then 0.5
  // threshold: boundaries land between cells instead of on cell edges
  const out = new Uint8Array(image.width * image.height);
  const sx = size / image.width;
  const sy = size / image.height;
  for (let j = 0; j < image.height; j++) {
    const gy = Math.min(Math.max((j + 0.5) * sy - 0.5, 0), size - 1);
    const y0 = Math.floor(gy);
    const y1 = Math.min(y0 + 1, size - 1);
    const fy = gy - y0;
    for (let i = 0; i < image.width; i++) {
      const gx = Math.min(Math.max((i + 0.5) * sx - 0.5, 0), size - 1);
      const x0 = Math.floor(gx);
      const x1 = Math.min(x0 + 1, size - 1);
      const fx = gx - x0;
      const p =
        probs[y0 * size + x0] * (1 - fx) * (1 - fy) +
        probs[y0 * size + x1] * fx * (1 - fy) +
        probs[y1 * size + x0] * (1 - fx) * fy +
        probs[y1 * size + x1] * fx * fy;
      out[j * image.width + i] = p > 0.5 ? 1 : 0;
    }
  }
  return out;
}

interface Component {
  pixels: number[];
  cx: number;
  cy: number;
}

function connectedComponents(mask: Uint8Array, w: number, h: number): Component[] {
  const seen = new Uint8Array(mask.length);
  const components: Component[] = [];
  for (let start = 0; start < mask.length; start++) {
    if (!mask[start] || seen[start]) continue;
    const stack = [start];
    seen[start] = 1;
    const pixels: number[] = [];
    let sx = 0;
    let sy = 0;
    while (stack.length) {
      const p = stack.pop()!;
      pixels.push(p);
      const px = p % w;
      const py = (p - px) / w;
      sx += px;
      sy += py;
      for (let dy = -1; dy <= 1; dy++) {
        for (let dx = -1; dx <= 1; dx++) {
          const nx = px + dx;
          const ny = py + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const q = ny * w + nx;
          if (mask[q] && !seen[q]) {
            seen[q] = 1;
            stack.push(q);
          }
        }
      }
    }
    components.push({ pixels, cx: sx / pixels.length, cy: sy / pixels.length });
  }
  return components;
}

/**
 * Turn a predicted binary tooth mask into an instance label map by
 * matching predicted components to the source image's tooth centroids.
 * Each source tooth claims its nearest sufficiently large component.
 */
function labelPredictedTeeth(
  predicted: Uint8Array,
  source: CaseImage,
): { labels: Uint8Array; table: Record<string, number> } {
  const { width: w, height: h } = source;
  const sourceCentroids = new Map<number, { cx: number; cy: number; n: number }>();
  for (let p = 0; p < source.tooth.length; p++) {
    const label = source.tooth[p];
    if (!label) continue;
    const e = sourceCentroids.get(label) ?? { cx: 0, cy: 0, n: 0 };
    e.cx += p % w;
    e.cy += Math.floor(p / w);
    e.n += 1;
    sourceCentroids.set(label, e);
  }
  const components = connectedComponents(predicted, w, h)
    .filter((c) => c.pixels.length >= 16)
    .sort((a, b) => b.pixels.length - a.pixels.length);

  const labels = new Uint8Array(w * h);
  const table: Record<string, number> = {};
  const taken = new Set<number>();
  const sourceEntry = source.manifestEntry as { tooth_table?: Record<string, number> };
  const sourceTable = sourceEntry.tooth_table ?? {};
  for (const [label, e] of [...sourceCentroids.entries()].sort((a, b) => a[0] - b[0])) {
    const cx = e.cx / e.n;
    const cy = e.cy / e.n;
    let best = -1;
    let bestDist = Infinity;
    components.forEach((c, k) => {
      if (taken.has(k)) return;
      const d = (c.cx - cx) ** 2 + (c.cy - cy) ** 2;
      if (d < bestDist) {
        bestDist = d;
        best = k;
      }
    });
    if (best < 0) continue;
    taken.add(best);
    for (const p of components[best].pixels) labels[p] = label;
    table[String(label)] = sourceTable[String(label)] ?? label;
  }
  return { labels, table };
}

/**
 * Write model predictions as an ingest-format case: mask PNGs plus a
 * manifest that the measurement engine's analyze command accepts as-is.
 * Targets without a model fall back to the source masks, so the case
 * stays complete.
 */
export function predictMasks(options: PredictOptions): string {
  const { caseDir, outDir, models, size } = options;
  const sourceManifest = JSON.parse(
    fs.readFileSync(path.join(caseDir, 'case.json'), 'utf8'),
  );
  const images = loadCaseDir(caseDir);
  fs.mkdirSync(path.join(outDir, 'masks'), { recursive: true });

  const entries: Array<Record<string, unknown>> = [];
  for (const image of images) {
    const entry = { ...(image.manifestEntry as Record<string, unknown>) };
    const bone = models.bone ? predictMask(models.bone, image, size) : image.bone;
    const cej = models.cej ? predictMask(models.cej, image, size) : image.cej;
    let toothLabels: Uint8Array;
    if (models.tooth) {
      const predicted = predictMask(models.tooth, image, size);
      const labelled = labelPredictedTeeth(predicted, image);
      toothLabels = labelled.labels;
      entry.tooth_table = labelled.table;
    } else {
      toothLabels = image.tooth;
    }
    const names = {
      bone_mask: `masks/${image.imageId}_bone.png`,
      tooth_mask: `masks/${image.imageId}_tooth.png`,
      cej_mask: `masks/${image.imageId}_cej.png`,
    };
    const toBytes = (mask: Uint8Array, binary: boolean) => {
      const bytes = new Uint8Array(mask.length);
      for (let i = 0; i < mask.length; i++) bytes[i] = binary ? (mask[i] ? 255 : 0) : mask[i];
      return bytes;
    };
    writeGrayPng(path.join(outDir, names.bone_mask), {
      width: image.width, height: image.height, data: toBytes(bone, true),
    });
    writeGrayPng(path.join(outDir, names.tooth_mask), {
      width: image.width, height: image.height, data: toBytes(toothLabels, false),
    });
    writeGrayPng(path.join(outDir, names.cej_mask), {
      width: image.width, height: image.height, data: toBytes(cej, true),
    });
    Object.assign(entry, names);
    entries.push(entry);
  }
  const manifest = {
    schema_version: sourceManifest.schema_version ?? 1,
    case_id: options.caseId ?? `${sourceManifest.case_id}-predicted`,
    patient_age: sourceManifest.patient_age,
    images: entries,
  };
  const manifestPath = path.join(outDir, 'case.json');
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + '\n');
  return manifestPath;
}
