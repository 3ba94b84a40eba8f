import { mkdirSync, mkdtempSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";

import { encodeWavPcm16, pitchShift, RawAudio, synthesizeVoice } from "../src/audio.js";
import { makeTestCheckpoint, writeCheckpoint } from "../src/model.js";
import { getRecipe } from "../src/zoo.js";

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export function writeTestCheckpoint(dir: string, model: string, seed = 0): string {
  const recipe = getRecipe(model);
  const path = join(dir, recipe.checkpointFile);
  writeCheckpoint(path, makeTestCheckpoint(model, recipe.mel.nMels, [48, 32], seed));
  return path;
}

export interface SmokeSet {
  dir: string;
  manifestPath: string;
  checkpointDir: string;
}

/**
 * The bundled 10-clip audio set: two synthetic speakers (3 genuine takes
 * each) plus pitch-shifted impostor takes claiming each identity (2 each).
 */
export function buildSmokeSet(sampleRate = 22050): SmokeSet {
  const dir = tempDir("pve-extractor-smoke-");
  const rows = ["path,utterance_id,identity_id,label,dataset"];
  const addClip = (name: string, audio: RawAudio, identity: string, label: string) => {
    const path = join(dir, `${name}.wav`);
    writeFileSync(path, encodeWavPcm16(audio));
    rows.push(`${path},${name},${identity},${label},smoke`);
  };
  for (let i = 0; i < 3; i++) {
    addClip(`a${i}`, synthesizeVoice(120, 1.2, sampleRate, 100 + i), "speakerA", "bonafide");
    addClip(`b${i}`, synthesizeVoice(210, 1.2, sampleRate, 200 + i), "speakerB", "bonafide");
  }
  for (let i = 0; i < 2; i++) {
    addClip(`sa${i}`, pitchShift(synthesizeVoice(120, 1.2, sampleRate, 300 + i), 1.35),
            "speakerA", "spoof");
    addClip(`sb${i}`, pitchShift(synthesizeVoice(210, 1.2, sampleRate, 400 + i), 0.75),
            "speakerB", "spoof");
  }
  const manifestPath = join(dir, "manifest.csv");
  writeFileSync(manifestPath, rows.join("\n") + "\n");
  const checkpointDir = join(dir, "checkpoints");
  mkdirSync(checkpointDir, { recursive: true });
  return { dir, manifestPath, checkpointDir };
}
