/**
 * Extraction pipeline: manifest -> decode -> resample to the backbone's
 * native rate -> log-mel frontend -> frozen encoder -> temporal pooling ->
 * engine store file.
 *
 * Unreadable audio files are skipped with a warning and listed in a sidecar
 * failures CSV; a missing checkpoint aborts. The store is written to a
 * temporary file and renamed into place, and a metadata sidecar records the
 * full resolved configuration.
 */

import { readFileSync, renameSync, writeFileSync } from "fs";

import { decodeWav, RawAudio } from "./audio.js";
import { logMelFrames, resample } from "./dsp.js";
import { ManifestEntry } from "./manifest.js";
import { Checkpoint, encodeFrames, poolFrames, Pooling } from "./model.js";
import { encodeBinaryStore, encodeJsonlStore, StoreRecord } from "./store.js";
import { getRecipe, loadCheckpoint, ModelRecipe } from "./zoo.js";

export interface ExtractorConfig {
  model: string;
  checkpointDir?: string;
  /** -1 = final encoder layer (default); 0 = pooled frontend frames. */
  layer: number;
  pooling: Pooling;
  batchSize: number;
  outputPath: string;
  format: "binary" | "jsonl";
}

export const DEFAULT_CONFIG: Omit<ExtractorConfig, "model" | "outputPath"> = {
  layer: -1,
  pooling: "mean",
  batchSize: 64,
  format: "binary",
};

export interface ExtractFailure {
  path: string;
  utteranceId: string;
  error: string;
}

export interface ExtractResult {
  records: number;
  dim: number;
  failures: ExtractFailure[];
  outputPath: string;
  modelName: string;
}

export function embedClip(
  audio: RawAudio,
  recipe: ModelRecipe,
  ckpt: Checkpoint,
  layer: number,
  pooling: Pooling,
): Float32Array {
  const resampled = resample(audio, recipe.sampleRate);
  const frames = logMelFrames(resampled, recipe.mel);
  const encoded = encodeFrames(ckpt, frames, layer);
  const pooled = poolFrames(encoded, pooling);
  const out = new Float32Array(pooled.length);
  for (let i = 0; i < pooled.length; i++) {
    out[i] = Math.fround(pooled[i]);
  }
  for (const v of out) {
    if (!Number.isFinite(v)) {
      throw new Error("non-finite embedding value");
    }
  }
  return out;
}

/** Provenance string carried in the store's model_name field. */
export function provenance(config: ExtractorConfig, recipe: ModelRecipe): string {
  const layerTag = config.layer < 0 ? "final" : String(config.layer);
  return `${config.model}[layer=${layerTag},pool=${config.pooling},sr=${recipe.sampleRate}]`;
}

export function runExtraction(
  entries: ManifestEntry[],
  config: ExtractorConfig,
  log: (msg: string) => void = (msg) => console.error(msg),
): ExtractResult {
  const recipe = getRecipe(config.model);
  const ckpt = loadCheckpoint(config.model, config.checkpointDir); // aborts if missing
  const records: StoreRecord[] = [];
  const failures: ExtractFailure[] = [];

  for (let start = 0; start < entries.length; start += config.batchSize) {
    const batch = entries.slice(start, start + config.batchSize);
    for (const entry of batch) {
      try {
        const audio = decodeWav(readFileSync(entry.path));
        const embedding = embedClip(audio, recipe, ckpt, config.layer, config.pooling);
        records.push({
          utteranceId: entry.utteranceId,
          identityId: entry.identityId,
          label: entry.label,
          dataset: entry.dataset,
          embedding,
        });
      } catch (err) {
        const message = (err as Error).message;
        log(`warning: skipping ${entry.path} (${entry.utteranceId}): ${message}`);
        failures.push({ path: entry.path, utteranceId: entry.utteranceId, error: message });
      }
    }
  }

  const modelName = provenance(config, recipe);
  const tmpPath = `${config.outputPath}.tmp`;
  if (config.format === "jsonl") {
    writeFileSync(tmpPath, encodeJsonlStore(records));
  } else {
    writeFileSync(tmpPath, encodeBinaryStore(records, modelName));
  }
  renameSync(tmpPath, config.outputPath);

  if (failures.length) {
    const sidecar = `${config.outputPath}.failures.csv`;
    const lines = ["path,utterance_id,error"];
    for (const f of failures) {
      const esc = (s: string) => `"${s.replace(/"/g, '""')}"`;
      lines.push([esc(f.path), esc(f.utteranceId), esc(f.error)].join(","));
    }
    writeFileSync(sidecar, lines.join("\n") + "\n");
    log(`${failures.length} file(s) skipped; see ${sidecar}`);
  }

  const meta = {
    model: config.model,
    model_name: modelName,
    sample_rate: recipe.sampleRate,
    n_mels: recipe.mel.nMels,
    layer: config.layer < 0 ? "final" : config.layer,
    pooling: config.pooling,
    format: config.format,
    records: records.length,
    skipped: failures.length,
    dim: records.length ? records[0].embedding.length : 0,
    checkpoint_note: ckpt.header.note ?? null,
  };
  writeFileSync(`${config.outputPath}.meta.json`, JSON.stringify(meta, null, 2) + "\n");

  return {
    records: records.length,
    dim: meta.dim,
    failures,
    outputPath: config.outputPath,
    modelName,
  };
}
