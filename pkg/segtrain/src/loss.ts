import * as tf from '@tensorflow/tfjs';

export const CLAMP_EPS = 1e-7;

/**
 * Binary cross-entropy over mask batches: the per-pixel cross-entropy is
 * summed over each sample's pixels, then averaged over the batch.
 * Predictions are clamped to [CLAMP_EPS, 1 - CLAMP_EPS] before the logs.
 */
export function bceLoss(targets: tf.Tensor, predictions: tf.Tensor): tf.Scalar {
  if (!tf.util.arraysEqual(targets.shape, predictions.shape)) {
    throw new Error(
      `bceLoss: shape mismatch ${JSON.stringify(targets.shape)} vs ` +
      `${JSON.stringify(predictions.shape)}`,
    );
  }
  return tf.tidy(() => {
    const p = tf.clipByValue(predictions, CLAMP_EPS, 1 - CLAMP_EPS);
    const y = targets.cast('float32');
    const perPixel = tf.add(
      tf.mul(y, tf.log(p)),
      tf.mul(tf.sub(1, y), tf.log(tf.sub(1, p))),
    );
    const axes = perPixel.shape.map((_, i) => i).slice(1);
    const perSample = tf.sum(perPixel, axes);
    return tf.neg(tf.mean(perSample)) as tf.Scalar;
  });
}
