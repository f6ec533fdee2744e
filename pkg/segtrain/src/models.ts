import * as tf from '@tensorflow/tfjs';

export type PlainKernel = 3 | 5 | 7;

export type Variant =
  | { kind: 'plain-unet'; kernelSize: PlainKernel }
  | { kind: 'unet-resnet34' }
  | { kind: 'unet-resnet50' };

export interface BuildOptions {
  inputSize: number;
  /**
   * Scales every channel count; 1 reproduces the reference ladders.
   * Fractions exist so the training loop can be exercised quickly in
   * tests on hardware where the full ladders are too slow.
   */
  widthMultiplier?: number;
  seed?: number;
  /**
   * Initial bias of the sigmoid head, as a logit. Setting it to the
   * training split's class prior skips the base-rate learning phase.
   */
  outputBiasLogit?: number;
}

export function variantName(variant: Variant): string {
  return variant.kind === 'plain-unet'
    ? `plain-unet-k${variant.kernelSize}`
    : variant.kind;
}

export function parseVariant(name: string): Variant {
  const plain = /^plain-unet-k([357])$/.exec(name);
  if (plain) return { kind: 'plain-unet', kernelSize: Number(plain[1]) as PlainKernel };
  if (name === 'unet-resnet34') return { kind: 'unet-resnet34' };
  if (name === 'unet-resnet50') return { kind: 'unet-resnet50' };
  throw new Error(`unknown variant ${name}`);
}

export function downsamplingFactor(variant: Variant): number {
  return variant.kind === 'plain-unet' ? 16 : 32;
}

// toy-scale runs take a few hundred steps, so the moving statistics
// need a faster time constant than the framework's 0.99 default
const BN_MOMENTUM = 0.9;

/** Deterministic per-layer initializer seeds (He init suits ReLU stacks). */
function makeSeeder(seed: number) {
  let counter = seed;
  return () => tf.initializers.heNormal({ seed: counter++ });
}

type Seeder = ReturnType<typeof makeSeeder>;
type Sym = tf.SymbolicTensor;

function convRelu(x: Sym, filters: number, kernel: number, init: Seeder,
                  batchNorm: boolean, strides = 1): Sym {
  let h = tf.layers
    .conv2d({
      filters,
      kernelSize: kernel,
      strides,
      padding: 'same',
      useBias: !batchNorm,
      kernelInitializer: init(),
    })
    .apply(x) as Sym;
  if (batchNorm) {
    h = tf.layers.batchNormalization({ momentum: BN_MOMENTUM }).apply(h) as Sym;
  }
  return tf.layers.reLU().apply(h) as Sym;
}

function basicBlock(x: Sym, filters: number, init: Seeder, strides = 1): Sym {
  let h = convRelu(x, filters, 3, init, true, strides);
  h = tf.layers
    .conv2d({
      filters,
      kernelSize: 3,
      padding: 'same',
      useBias: false,
      kernelInitializer: init(),
    })
    .apply(h) as Sym;
  h = tf.layers.batchNormalization({ momentum: BN_MOMENTUM }).apply(h) as Sym;
  let shortcut = x;
  if (strides !== 1 || x.shape[3] !== filters) {
    shortcut = tf.layers
      .conv2d({
        filters,
        kernelSize: 1,
        strides,
        padding: 'same',
        useBias: false,
        kernelInitializer: init(),
      })
      .apply(x) as Sym;
    shortcut = tf.layers.batchNormalization({ momentum: BN_MOMENTUM }).apply(shortcut) as Sym;
  }
  const sum = tf.layers.add().apply([h, shortcut]) as Sym;
  return tf.layers.reLU().apply(sum) as Sym;
}

function bottleneckBlock(x: Sym, filters: number, init: Seeder, strides = 1): Sym {
  const out = filters * 4;
  let h = convRelu(x, filters, 1, init, true, strides);
  h = convRelu(h, filters, 3, init, true);
  h = tf.layers
    .conv2d({
      filters: out,
      kernelSize: 1,
      padding: 'same',
      useBias: false,
      kernelInitializer: init(),
    })
    .apply(h) as Sym;
  h = tf.layers.batchNormalization({ momentum: BN_MOMENTUM }).apply(h) as Sym;
  let shortcut = x;
  if (strides !== 1 || x.shape[3] !== out) {
    shortcut = tf.layers
      .conv2d({
        filters: out,
        kernelSize: 1,
        strides,
        padding: 'same',
        useBias: false,
        kernelInitializer: init(),
      })
      .apply(x) as Sym;
    shortcut = tf.layers.batchNormalization({ momentum: BN_MOMENTUM }).apply(shortcut) as Sym;
  }
  const sum = tf.layers.add().apply([h, shortcut]) as Sym;
  return tf.layers.reLU().apply(sum) as Sym;
}

function upConcatConvs(x: Sym, skip: Sym | null, filters: number, kernel: number,
                       init: Seeder, batchNorm: boolean): Sym {
  let h = tf.layers.upSampling2d({ size: [2, 2] }).apply(x) as Sym;
  if (skip !== null) {
    h = tf.layers.concatenate().apply([h, skip]) as Sym;
  }
  h = convRelu(h, filters, kernel, init, batchNorm);
  return convRelu(h, filters, kernel, init, batchNorm);
}

function sigmoidHead(x: Sym, kernel: number, init: Seeder, biasLogit?: number): Sym {
  return tf.layers
    .conv2d({
      filters: 1,
      kernelSize: kernel,
      padding: 'same',
      activation: 'sigmoid',
      kernelInitializer: init(),
      biasInitializer:
        biasLogit === undefined
          ? 'zeros'
          : tf.initializers.constant({ value: biasLogit }),
    })
    .apply(x) as Sym;
}

/**
 * Contraction halves width/height and doubles feature maps per level;
 * expansion mirrors it with skip concatenations, ending in a 1-channel
 * sigmoid head. Channel ladders follow the reference tables exactly at
 * widthMultiplier 1.
 */
export function buildModel(variant: Variant, options: BuildOptions): tf.LayersModel {
  const { inputSize } = options;
  const mult = options.widthMultiplier ?? 1;
  const seeder = makeSeeder(options.seed ?? 1234);
  const factor = downsamplingFactor(variant);
  if (inputSize % factor !== 0) {
    throw new Error(
      `${variantName(variant)} needs input dims divisible by ${factor}, got ${inputSize}`,
    );
  }
  const w = (n: number) => Math.max(4, Math.round(n * mult));
  const inp = tf.input({ shape: [inputSize, inputSize, 1] });

  if (variant.kind === 'plain-unet') {
    const k = variant.kernelSize;
    const enc: Sym[] = [];
    let h = inp as unknown as Sym;
    for (const filters of [64, 128, 256, 512].map(w)) {
      h = convRelu(h, filters, k, seeder, false);
      h = convRelu(h, filters, k, seeder, false);
      enc.push(h);
      h = tf.layers.maxPooling2d({ poolSize: 2 }).apply(h) as Sym;
    }
    h = convRelu(h, w(1024), k, seeder, false);
    h = convRelu(h, w(1024), k, seeder, false); // bottleneck, size/16
    for (const [filters, skip] of [
      [w(512), enc[3]],
      [w(256), enc[2]],
      [w(128), enc[1]],
      [w(64), enc[0]],
    ] as Array<[number, Sym]>) {
      h = upConcatConvs(h, skip, filters, k, seeder, false);
    }
    const out = sigmoidHead(h, k, seeder, options.outputBiasLogit);
    return tf.model({ inputs: inp, outputs: out, name: variantName(variant) });
  }

  // shared encoder scaffold for the residual variants
  const stem = convRelu(inp as unknown as Sym, w(64), 3, seeder, true, 2); // 1/2
  let h = tf.layers
    .maxPooling2d({ poolSize: 3, strides: 2, padding: 'same' })
    .apply(stem) as Sym; // 1/4
  const block = variant.kind === 'unet-resnet34' ? basicBlock : bottleneckBlock;
  const stageDepths = variant.kind === 'unet-resnet34' ? [3, 4, 6, 3] : [3, 4, 6, 3];
  const stageFilters = [64, 128, 256, 512].map(w);
  const skips: Sym[] = [];
  stageDepths.forEach((depth, stage) => {
    for (let i = 0; i < depth; i++) {
      const strides = stage > 0 && i === 0 ? 2 : 1;
      h = block(h, stageFilters[stage], seeder, strides);
    }
    if (stage < 3) skips.push(h); // 1/4, 1/8, 1/16
  });
  // h is now the 1/32 bottleneck
  h = upConcatConvs(h, skips[2], w(256), 3, seeder, true); // 1/16
  h = upConcatConvs(h, skips[1], w(128), 3, seeder, true); // 1/8
  h = upConcatConvs(h, skips[0], w(64), 3, seeder, true); // 1/4
  h = upConcatConvs(h, stem, w(32), 3, seeder, true); // 1/2
  h = upConcatConvs(h, null, w(16), 3, seeder, true); // full
  const out = sigmoidHead(h, 3, seeder, options.outputBiasLogit);
  return tf.model({ inputs: inp, outputs: out, name: variantName(variant) });
}
