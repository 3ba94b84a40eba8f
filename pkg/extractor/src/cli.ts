#!/usr/bin/env node
/**
 * pve-extract: frozen-backbone embedding extraction into PVE stores.
 *
 * Subcommands: extract (manifest CSV -> store file), selfcheck, and
 * make-test-checkpoint (seeded random weights in a backbone's shape, for
 * development and CI).
 */

import { mkdirSync } from "fs";
import { join } from "path";
import { parseArgs } from "util";

import { DEFAULT_CONFIG, runExtraction } from "./extract.js";
import { readManifest } from "./manifest.js";
import { makeTestCheckpoint, Pooling, writeCheckpoint } from "./model.js";
import { runSelfcheck } from "./selfcheck.js";
import { getRecipe, resolveCheckpointDir, SUPPORTED_MODELS } from "./zoo.js";

const USAGE = `usage: pve-extract <command> [options]

commands:
  extract                embed a manifest of audio files into a PVE store
    --manifest <csv>       CSV: path,utterance_id,identity_id,label,dataset
    --model <name>         one of: ${SUPPORTED_MODELS.join(", ")}
    --out <path>           output store file
    --checkpoints <dir>    checkpoint directory
                           (default $PVE_CHECKPOINT_DIR or ./checkpoints)
    --layer <n>            -1 = final layer (default), 0 = pooled frontend
    --pooling mean|max     temporal pooling (default mean)
    --batch-size <n>       files per processing batch (default 64)
    --format binary|jsonl  output format (default binary)

  selfcheck              embed bundled synthetic clips and validate
    --model <name>         backbone to check (default BEATs)
    --checkpoints <dir>
    --python <bin>         interpreter with the engine (default python3)

  make-test-checkpoint   seeded random weights in a backbone's shape (dev/CI)
    --model <name>
    --checkpoints <dir>
    --hidden <a,b,...>     encoder layer widths (default 48,32)
    --seed <n>             RNG seed (default 0)
`;

function requireString(values: Record<string, unknown>, name: string): string {
  const v = values[name];
  if (typeof v !== "string" || !v) {
    throw new Error(`--${name} is required (see pve-extract --help)`);
  }
  return v;
}

function requireModel(values: Record<string, unknown>, fallback?: string): string {
  const model = (values.model as string | undefined) ?? fallback;
  if (!model) {
    throw new Error("--model is required");
  }
  getRecipe(model); // validates against the supported list
  return model;
}

function cmdExtract(args: string[]): number {
  const { values } = parseArgs({
    args,
    options: {
      manifest: { type: "string" },
      model: { type: "string" },
      out: { type: "string" },
      checkpoints: { type: "string" },
      layer: { type: "string", default: String(DEFAULT_CONFIG.layer) },
      pooling: { type: "string", default: DEFAULT_CONFIG.pooling },
      "batch-size": { type: "string", default: String(DEFAULT_CONFIG.batchSize) },
      format: { type: "string", default: DEFAULT_CONFIG.format },
    },
  });
  const pooling = values.pooling as string;
  if (pooling !== "mean" && pooling !== "max") {
    throw new Error(`--pooling must be mean or max, got ${pooling}`);
  }
  const format = values.format as string;
  if (format !== "binary" && format !== "jsonl") {
    throw new Error(`--format must be binary or jsonl, got ${format}`);
  }
  const entries = readManifest(requireString(values, "manifest"));
  const result = runExtraction(entries, {
    model: requireModel(values),
    checkpointDir: values.checkpoints as string | undefined,
    layer: parseInt(values.layer as string, 10),
    pooling: pooling as Pooling,
    batchSize: parseInt(values["batch-size"] as string, 10),
    outputPath: requireString(values, "out"),
    format,
  });
  console.log(JSON.stringify({
    output: result.outputPath,
    model_name: result.modelName,
    records: result.records,
    dim: result.dim,
    skipped: result.failures.length,
  }, null, 2));
  return 0;
}

function cmdSelfcheck(args: string[]): number {
  const { values } = parseArgs({
    args,
    options: {
      model: { type: "string", default: "BEATs" },
      checkpoints: { type: "string" },
      python: { type: "string", default: "python3" },
    },
  });
  const report = runSelfcheck(
    requireModel(values, "BEATs"),
    values.checkpoints as string | undefined,
    values.python as string,
  );
  console.log(JSON.stringify(report, null, 2));
  return report.status === "ok" && report.engineIngest !== "failed" ? 0 : 1;
}

function cmdMakeTestCheckpoint(args: string[]): number {
  const { values } = parseArgs({
    args,
    options: {
      model: { type: "string" },
      checkpoints: { type: "string" },
      hidden: { type: "string", default: "48,32" },
      seed: { type: "string", default: "0" },
    },
  });
  const model = requireModel(values);
  const recipe = getRecipe(model);
  const dims = (values.hidden as string).split(",").map((s) => parseInt(s.trim(), 10));
  if (!dims.length || dims.some((d) => !Number.isFinite(d) || d < 1)) {
    throw new Error(`bad --hidden spec: ${values.hidden}`);
  }
  const seed = parseInt(values.seed as string, 10);
  const dir = resolveCheckpointDir(values.checkpoints as string | undefined);
  mkdirSync(dir, { recursive: true });
  const path = join(dir, recipe.checkpointFile);
  writeCheckpoint(path, makeTestCheckpoint(model, recipe.mel.nMels, dims, seed));
  console.error(`wrote ${path}`);
  console.log(JSON.stringify({ checkpoint: path, model, layers: dims, seed }, null, 2));
  return 0;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    switch (command) {
      case "extract":
        return cmdExtract(rest);
      case "selfcheck":
        return cmdSelfcheck(rest);
      case "make-test-checkpoint":
        return cmdMakeTestCheckpoint(rest);
      case "--help":
      case "-h":
      case "help":
      case undefined:
        console.log(USAGE);
        return command === undefined ? 2 : 0;
      default:
        throw new Error(`unknown command ${command}`);
    }
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly || process.argv[1]?.endsWith("cli.js")) {
  process.exitCode = main(process.argv.slice(2));
}
