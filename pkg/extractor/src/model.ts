/**
 * Checkpoint-driven frame encoder.
 *
 * A checkpoint file (.pvew) fully defines the network that maps log-mel
 * frames to per-frame activations: magic "PVEW", a u32 LE JSON header
 * length, the JSON header (hyperparameters and layer shapes), then all
 * layer weights as little-endian float32 in declaration order (row-major
 * W then b per layer). Weights are never updated here; this is frozen
 * inference only.
 *
 * Utterance embeddings are a temporal pooling (mean or max) of the chosen
 * layer's per-frame activations; layer -1 (default) is the final layer,
 * layer 0 pools the raw log-mel frames.
 */

import { readFileSync, writeFileSync } from "fs";

import { seededRandom } from "./audio.js";

export const CHECKPOINT_MAGIC = "PVEW";
export const CHECKPOINT_VERSION = 1;

export type Pooling = "mean" | "max";

export interface LayerShape {
  inDim: number;
  outDim: number;
}

export interface CheckpointHeader {
  formatVersion: number;
  model: string;
  nMels: number;
  layers: LayerShape[];
  note?: string;
}

export interface Checkpoint {
  header: CheckpointHeader;
  /** Per layer: weights row-major (outDim x inDim), then bias (outDim). */
  weights: Float32Array[];
}

export class CheckpointError extends Error {}

export function readCheckpoint(path: string): Checkpoint {
  let raw: Uint8Array;
  try {
    raw = readFileSync(path);
  } catch (err) {
    throw new CheckpointError(`cannot read checkpoint ${path}: ${(err as Error).message}`);
  }
  const view = new DataView(raw.buffer, raw.byteOffset, raw.byteLength);
  if (raw.length < 8 || String.fromCharCode(...raw.subarray(0, 4)) !== CHECKPOINT_MAGIC) {
    throw new CheckpointError(`${path}: bad checkpoint magic`);
  }
  const headerLength = view.getUint32(4, true);
  const headerBytes = raw.subarray(8, 8 + headerLength);
  let header: CheckpointHeader;
  try {
    header = JSON.parse(new TextDecoder().decode(headerBytes));
  } catch {
    throw new CheckpointError(`${path}: unreadable checkpoint header`);
  }
  if (header.formatVersion !== CHECKPOINT_VERSION) {
    throw new CheckpointError(`${path}: unsupported checkpoint version ${header.formatVersion}`);
  }
  if (typeof header.model !== "string" || typeof header.nMels !== "number"
      || !Array.isArray(header.layers)
      || header.layers.some((l) => !Number.isInteger(l?.inDim) || !Number.isInteger(l?.outDim)
                                   || l.inDim < 1 || l.outDim < 1)) {
    throw new CheckpointError(`${path}: malformed checkpoint header`);
  }
  let offset = 8 + headerLength;
  const weights: Float32Array[] = [];
  for (const layer of header.layers) {
    const count = layer.outDim * layer.inDim + layer.outDim;
    const bytes = count * 4;
    if (offset + bytes > raw.length) {
      throw new CheckpointError(`${path}: checkpoint truncated at byte ${raw.length}`);
    }
    // copy so alignment never depends on the file buffer
    const chunk = new Float32Array(count);
    for (let i = 0; i < count; i++) {
      chunk[i] = view.getFloat32(offset + i * 4, true);
    }
    weights.push(chunk);
    offset += bytes;
  }
  if (offset !== raw.length) {
    throw new CheckpointError(`${path}: trailing bytes after declared weights`);
  }
  return { header, weights };
}

export function writeCheckpoint(path: string, ckpt: Checkpoint): void {
  const headerBytes = new TextEncoder().encode(JSON.stringify(ckpt.header));
  let total = 8 + headerBytes.length;
  for (const w of ckpt.weights) total += w.length * 4;
  const out = new Uint8Array(total);
  const view = new DataView(out.buffer);
  for (let i = 0; i < 4; i++) out[i] = CHECKPOINT_MAGIC.charCodeAt(i);
  view.setUint32(4, headerBytes.length, true);
  out.set(headerBytes, 8);
  let offset = 8 + headerBytes.length;
  for (const w of ckpt.weights) {
    for (let i = 0; i < w.length; i++) {
      view.setFloat32(offset + i * 4, w[i], true);
    }
    offset += w.length * 4;
  }
  writeFileSync(path, out);
}

/**
 * Seeded random checkpoint in a model's shape: the development and test
 * stand-in for converted upstream weights (conversion is a manual step,
 * see the README). Xavier-scaled gaussians via Box-Muller.
 */
export function makeTestCheckpoint(
  model: string,
  nMels: number,
  hiddenDims: number[],
  seed: number,
): Checkpoint {
  const rand = seededRandom(seed);
  const gaussian = () => {
    const u = Math.max(rand(), 1e-12);
    const v = rand();
    return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
  };
  const dims = [nMels, ...hiddenDims];
  const layers: LayerShape[] = [];
  const weights: Float32Array[] = [];
  for (let l = 0; l + 1 < dims.length; l++) {
    const inDim = dims[l];
    const outDim = dims[l + 1];
    layers.push({ inDim, outDim });
    const scale = Math.sqrt(2 / (inDim + outDim));
    const chunk = new Float32Array(outDim * inDim + outDim);
    for (let i = 0; i < outDim * inDim; i++) {
      chunk[i] = Math.fround(gaussian() * scale);
    }
    // biases stay zero
    weights.push(chunk);
  }
  return {
    header: {
      formatVersion: CHECKPOINT_VERSION,
      model,
      nMels,
      layers,
      note: `seeded test checkpoint (seed ${seed}), not converted upstream weights`,
    },
    weights,
  };
}

/** Frame-wise forward pass: tanh on hidden layers, linear final layer. */
export function encodeFrames(ckpt: Checkpoint, frames: Float64Array[], layer: number): Float64Array[] {
  const nLayers = ckpt.header.layers.length;
  const upTo = layer < 0 ? nLayers : layer;
  if (upTo > nLayers) {
    throw new CheckpointError(`layer ${layer} out of range (model has ${nLayers})`);
  }
  return frames.map((frame) => {
    let x = frame;
    for (let l = 0; l < upTo; l++) {
      const { inDim, outDim } = ckpt.header.layers[l];
      if (x.length !== inDim) {
        throw new CheckpointError(`layer ${l} expects dim ${inDim}, got ${x.length}`);
      }
      const w = ckpt.weights[l];
      const y = new Float64Array(outDim);
      for (let o = 0; o < outDim; o++) {
        let acc = w[outDim * inDim + o]; // bias
        const row = o * inDim;
        for (let i = 0; i < inDim; i++) {
          acc += w[row + i] * x[i];
        }
        y[o] = l === upTo - 1 && upTo === nLayers ? acc : Math.tanh(acc);
      }
      x = y;
    }
    return x;
  });
}

export function poolFrames(frames: Float64Array[], pooling: Pooling): Float64Array {
  const dim = frames[0].length;
  const out = new Float64Array(dim);
  if (pooling === "max") {
    out.fill(-Infinity);
    for (const f of frames) {
      for (let i = 0; i < dim; i++) out[i] = Math.max(out[i], f[i]);
    }
  } else {
    for (const f of frames) {
      for (let i = 0; i < dim; i++) out[i] += f[i];
    }
    for (let i = 0; i < dim; i++) out[i] /= frames.length;
  }
  return out;
}
