/**
 * Supported frozen backbones and their loading recipes.
 *
 * Each recipe fixes the model's native sample rate and mel frontend and
 * names the checkpoint file the encoder weights come from. Checkpoints are
 * external inputs resolved against --checkpoints (or $PVE_CHECKPOINT_DIR);
 * a missing file aborts extraction with the model named.
 */

import { existsSync } from "fs";
import { join } from "path";

import { MelConfig } from "./dsp.js";
import { Checkpoint, CheckpointError, readCheckpoint } from "./model.js";

export interface ModelRecipe {
  name: string;
  sampleRate: number;
  mel: MelConfig;
  checkpointFile: string;
}

function recipe(name: string, sampleRate: number, nMels: number,
                windowSamples: number, hopSamples: number): ModelRecipe {
  return {
    name,
    sampleRate,
    mel: { sampleRate, nMels, windowSamples, hopSamples, fMin: 20, fMax: 0 },
    checkpointFile: `${name}.pvew`,
  };
}

/** The four supported backbones (frontend hop/window at each model's native rate). */
export const MODEL_ZOO: Record<string, ModelRecipe> = {
  "Wav2Vec2-xlsr": recipe("Wav2Vec2-xlsr", 16000, 80, 400, 320),
  AudioCLIP: recipe("AudioCLIP", 44100, 128, 1024, 512),
  LaionCLAP: recipe("LaionCLAP", 48000, 64, 1024, 480),
  BEATs: recipe("BEATs", 16000, 128, 400, 160),
};

export const SUPPORTED_MODELS = Object.keys(MODEL_ZOO);

export function getRecipe(model: string): ModelRecipe {
  const found = MODEL_ZOO[model];
  if (!found) {
    throw new CheckpointError(
      `unknown model ${model!}; supported: ${SUPPORTED_MODELS.join(", ")}`,
    );
  }
  return found;
}

export function resolveCheckpointDir(explicit?: string): string {
  return explicit ?? process.env.PVE_CHECKPOINT_DIR ?? "checkpoints";
}

export function loadCheckpoint(model: string, checkpointDir?: string): Checkpoint {
  const recipeEntry = getRecipe(model);
  const dir = resolveCheckpointDir(checkpointDir);
  const path = join(dir, recipeEntry.checkpointFile);
  if (!existsSync(path)) {
    throw new CheckpointError(
      `checkpoint for ${model} not found at ${path}; place the converted ` +
      `weights there or generate a test checkpoint with ` +
      `"pve-extract make-test-checkpoint --model ${model}"`,
    );
  }
  const ckpt = readCheckpoint(path);
  if (ckpt.header.model !== model) {
    throw new CheckpointError(
      `${path} holds weights for ${ckpt.header.model}, expected ${model}`,
    );
  }
  if (ckpt.header.nMels !== recipeEntry.mel.nMels) {
    throw new CheckpointError(
      `${path}: checkpoint frontend (${ckpt.header.nMels} mels) does not match ` +
      `the ${model} recipe (${recipeEntry.mel.nMels})`,
    );
  }
  return ckpt;
}
