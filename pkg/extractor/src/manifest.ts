/**
 * Input manifest: a CSV with header `path,utterance_id,identity_id,label,dataset`
 * naming one audio file per row.
 */

import { readFileSync } from "fs";
import Papa from "papaparse";

import { StoreLabel } from "./store.js";

export interface ManifestEntry {
  path: string;
  utteranceId: string;
  identityId: string;
  label: StoreLabel;
  dataset: string;
}

export class ManifestError extends Error {}

const REQUIRED = ["path", "utterance_id", "identity_id", "label", "dataset"];

export function parseManifest(csvText: string): ManifestEntry[] {
  const parsed = Papa.parse<Record<string, string>>(csvText.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length) {
    const first = parsed.errors[0];
    throw new ManifestError(`manifest row ${(first.row ?? 0) + 2}: ${first.message}`);
  }
  const fields = parsed.meta.fields ?? [];
  const missing = REQUIRED.filter((f) => !fields.includes(f));
  if (missing.length) {
    throw new ManifestError(`manifest header missing columns: ${missing.join(", ")}`);
  }
  const seen = new Set<string>();
  return parsed.data.map((row, i) => {
    const line = i + 2; // 1-based, after the header
    for (const f of REQUIRED) {
      if (!row[f]) {
        throw new ManifestError(`manifest row ${line}: empty ${f}`);
      }
    }
    if (row.label !== "bonafide" && row.label !== "spoof") {
      throw new ManifestError(
        `manifest row ${line}: label must be bonafide or spoof, got ${row.label!}`,
      );
    }
    if (seen.has(row.utterance_id)) {
      throw new ManifestError(`manifest row ${line}: duplicate utterance_id ${row.utterance_id}`);
    }
    seen.add(row.utterance_id);
    return {
      path: row.path,
      utteranceId: row.utterance_id,
      identityId: row.identity_id,
      label: row.label as StoreLabel,
      dataset: row.dataset,
    };
  });
}

export function readManifest(path: string): ManifestEntry[] {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch (err) {
    throw new ManifestError(`cannot read manifest ${path}: ${(err as Error).message}`);
  }
  return parseManifest(text);
}
