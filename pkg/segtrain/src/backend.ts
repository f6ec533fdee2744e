import * as tf from '@tensorflow/tfjs';

/**
 * Pick a backend per workload. Training needs conv backprop kernels that
 * only the pure-JS cpu backend implements in this environment; the wasm
 * backend is much faster for forward-only work (shape checks, inference).
 */
export async function useBackend(kind: 'train' | 'infer'): Promise<string> {
  if (kind === 'infer') {
    try {
      require('@tensorflow/tfjs-backend-wasm');
      await tf.setBackend('wasm');
      await tf.ready();
      return tf.getBackend();
    } catch {
      // fall through to cpu
    }
  }
  await tf.setBackend('cpu');
  await tf.ready();
  return tf.getBackend();
}
