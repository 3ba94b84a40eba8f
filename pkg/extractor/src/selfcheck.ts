/**
 * Install diagnostic: embeds a synthetic tone and a short speech-like clip
 * with the requested backbone, asserts output shape and finiteness, writes
 * a store and (when a Python interpreter with the engine is available)
 * verifies the engine ingests it.
 */

import { spawnSync } from "child_process";
import { mkdtempSync, rmSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";

import { encodeWavPcm16, synthesizeTone, synthesizeVoice } from "./audio.js";
import { ExtractorConfig, runExtraction } from "./extract.js";
import { readManifest } from "./manifest.js";
import { getRecipe } from "./zoo.js";

export interface SelfcheckReport {
  status: "ok" | "failed";
  model: string;
  dim: number;
  records: number;
  engineIngest: "ok" | "unavailable" | "failed";
  detail?: string;
}

export function runSelfcheck(
  model: string,
  checkpointDir: string | undefined,
  pythonBin = "python3",
): SelfcheckReport {
  const recipe = getRecipe(model);
  const dir = mkdtempSync(join(tmpdir(), "pve-selfcheck-"));
  try {
    const sr = recipe.sampleRate;
    writeFileSync(join(dir, "tone.wav"), encodeWavPcm16(synthesizeTone(440, 1.0, sr)));
    writeFileSync(join(dir, "voice.wav"), encodeWavPcm16(synthesizeVoice(130, 1.2, sr, 7)));
    const manifestPath = join(dir, "manifest.csv");
    writeFileSync(
      manifestPath,
      "path,utterance_id,identity_id,label,dataset\n" +
        `${join(dir, "tone.wav")},tone-0,selfcheck,bonafide,selfcheck\n` +
        `${join(dir, "voice.wav")},voice-0,selfcheck,bonafide,selfcheck\n`,
    );
    const config: ExtractorConfig = {
      model,
      checkpointDir,
      layer: -1,
      pooling: "mean",
      batchSize: 8,
      outputPath: join(dir, "selfcheck.pve"),
      format: "binary",
    };
    const result = runExtraction(readManifest(manifestPath), config);
    if (result.records !== 2 || result.failures.length > 0 || result.dim < 1) {
      return {
        status: "failed", model, dim: result.dim, records: result.records,
        engineIngest: "unavailable",
        detail: `expected 2 clean records, got ${result.records} with ${result.failures.length} failures`,
      };
    }

    const probe = spawnSync(pythonBin, ["-c", "import pve"], { encoding: "utf-8" });
    if (probe.status !== 0) {
      return { status: "ok", model, dim: result.dim, records: result.records,
               engineIngest: "unavailable", detail: "verification engine not importable" };
    }
    const ingest = spawnSync(
      pythonBin,
      ["-m", "pve.cli", "ingest", "--input", result.outputPath],
      { encoding: "utf-8" },
    );
    if (ingest.status !== 0) {
      return { status: "failed", model, dim: result.dim, records: result.records,
               engineIngest: "failed", detail: ingest.stderr.trim() };
    }
    return { status: "ok", model, dim: result.dim, records: result.records, engineIngest: "ok" };
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
