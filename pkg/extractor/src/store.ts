/**
 * Writers for the verification engine's store formats.
 *
 * Binary ("PVE1"): magic PVE1 | format version u16 LE | dim u32 LE |
 * record count u64 LE | model_name (u16 LE length + UTF-8), then per
 * record: utterance_id (u16 LE length + UTF-8), identity_id (u16 LE length
 * + UTF-8), label u8 (0 = bonafide, 1 = spoof), dataset tag (u16 LE length
 * + UTF-8), dim x f32 LE values. JSONL mirrors the engine's JSONL schema.
 */

export const STORE_MAGIC = "PVE1";
export const STORE_VERSION = 1;

export type StoreLabel = "bonafide" | "spoof";

export interface StoreRecord {
  utteranceId: string;
  identityId: string;
  label: StoreLabel;
  dataset: string;
  embedding: Float32Array;
}

const encoder = new TextEncoder();

function packString(text: string): Uint8Array {
  const bytes = encoder.encode(text);
  if (bytes.length > 0xffff) {
    throw new Error(`string field too long for format (${bytes.length} bytes)`);
  }
  const out = new Uint8Array(2 + bytes.length);
  new DataView(out.buffer).setUint16(0, bytes.length, true);
  out.set(bytes, 2);
  return out;
}

export function encodeBinaryStore(records: StoreRecord[], modelName: string): Uint8Array {
  const dim = records.length ? records[0].embedding.length : 0;
  for (const rec of records) {
    if (rec.embedding.length !== dim) {
      throw new Error(
        `inconsistent embedding dim: ${rec.utteranceId} has ${rec.embedding.length}, expected ${dim}`,
      );
    }
  }
  const parts: Uint8Array[] = [];
  const header = new Uint8Array(4 + 2 + 4 + 8);
  const view = new DataView(header.buffer);
  for (let i = 0; i < 4; i++) header[i] = STORE_MAGIC.charCodeAt(i);
  view.setUint16(4, STORE_VERSION, true);
  view.setUint32(6, dim, true);
  view.setBigUint64(10, BigInt(records.length), true);
  parts.push(header, packString(modelName));
  for (const rec of records) {
    parts.push(packString(rec.utteranceId));
    parts.push(packString(rec.identityId));
    parts.push(Uint8Array.of(rec.label === "bonafide" ? 0 : 1));
    parts.push(packString(rec.dataset));
    const values = new Uint8Array(dim * 4);
    const vview = new DataView(values.buffer);
    for (let i = 0; i < dim; i++) {
      vview.setFloat32(i * 4, rec.embedding[i], true);
    }
    parts.push(values);
  }
  let total = 0;
  for (const p of parts) total += p.length;
  const out = new Uint8Array(total);
  let offset = 0;
  for (const p of parts) {
    out.set(p, offset);
    offset += p.length;
  }
  return out;
}

export function encodeJsonlStore(records: StoreRecord[]): string {
  return records
    .map((rec) =>
      JSON.stringify({
        utterance_id: rec.utteranceId,
        identity_id: rec.identityId,
        label: rec.label,
        dataset: rec.dataset,
        embedding: Array.from(rec.embedding),
      }) + "\n",
    )
    .join("");
}
