export { bceLoss, CLAMP_EPS } from './loss';
export {
  buildModel,
  downsamplingFactor,
  parseVariant,
  variantName,
  type BuildOptions,
  type Variant,
} from './models';
export {
  buildCorpus,
  composite,
  loadCaseDir,
  makeRng,
  resizeMax,
  resizeNearest,
  targetMask,
  type CaseImage,
  type Corpus,
  type Sample,
  type Target,
} from './data';
export {
  DivergenceError,
  TOY_DEFAULTS,
  evaluateLoss,
  loadCheckpoint,
  predictBatch,
  saveCheckpoint,
  train,
  type TrainConfig,
  type TrainResult,
} from './train';
export { predictMask, predictMasks, type PredictOptions } from './predict';
export { useBackend } from './backend';
export { readGrayPng, writeGrayPng, type GrayImage } from './png';
