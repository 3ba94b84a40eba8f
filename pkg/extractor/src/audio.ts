/**
 * WAV decoding/encoding and the deterministic test-signal synthesizers used
 * by selfcheck and the bundled fixtures. Decoding supports PCM 16/24/32-bit
 * and IEEE float32, any channel count (mixed down to mono).
 */

export interface RawAudio {
  samples: Float64Array; // mono, in [-1, 1]
  sampleRate: number;
}

export class AudioDecodeError extends Error {}

function readTag(view: DataView, offset: number): string {
  return String.fromCharCode(
    view.getUint8(offset),
    view.getUint8(offset + 1),
    view.getUint8(offset + 2),
    view.getUint8(offset + 3),
  );
}

export function decodeWav(buffer: Uint8Array): RawAudio {
  const view = new DataView(buffer.buffer, buffer.byteOffset, buffer.byteLength);
  if (buffer.length < 44 || readTag(view, 0) !== "RIFF" || readTag(view, 8) !== "WAVE") {
    throw new AudioDecodeError("not a RIFF/WAVE file");
  }
  let offset = 12;
  let format = 0;
  let channels = 0;
  let sampleRate = 0;
  let bitsPerSample = 0;
  let dataStart = -1;
  let dataLength = 0;
  while (offset + 8 <= buffer.length) {
    const tag = readTag(view, offset);
    const size = view.getUint32(offset + 4, true);
    if (tag === "fmt ") {
      format = view.getUint16(offset + 8, true);
      channels = view.getUint16(offset + 10, true);
      sampleRate = view.getUint32(offset + 12, true);
      bitsPerSample = view.getUint16(offset + 22, true);
    } else if (tag === "data") {
      dataStart = offset + 8;
      dataLength = Math.min(size, buffer.length - dataStart);
    }
    offset += 8 + size + (size % 2);
  }
  if (dataStart < 0 || channels < 1 || sampleRate <= 0) {
    throw new AudioDecodeError("missing fmt or data chunk");
  }

  const bytesPerSample = bitsPerSample / 8;
  const frameCount = Math.floor(dataLength / (bytesPerSample * channels));
  const samples = new Float64Array(frameCount);
  for (let i = 0; i < frameCount; i++) {
    let acc = 0;
    for (let c = 0; c < channels; c++) {
      const at = dataStart + (i * channels + c) * bytesPerSample;
      if (format === 3 && bitsPerSample === 32) {
        acc += view.getFloat32(at, true);
      } else if (format === 1 && bitsPerSample === 16) {
        acc += view.getInt16(at, true) / 32768;
      } else if (format === 1 && bitsPerSample === 24) {
        const raw = view.getUint8(at) | (view.getUint8(at + 1) << 8) | (view.getUint8(at + 2) << 16);
        acc += (raw >= 0x800000 ? raw - 0x1000000 : raw) / 8388608;
      } else if (format === 1 && bitsPerSample === 32) {
        acc += view.getInt32(at, true) / 2147483648;
      } else {
        throw new AudioDecodeError(`unsupported WAV encoding: format ${format}, ${bitsPerSample} bits`);
      }
    }
    samples[i] = acc / channels;
  }
  return { samples, sampleRate };
}

export function encodeWavPcm16(audio: RawAudio): Uint8Array {
  const n = audio.samples.length;
  const out = new Uint8Array(44 + n * 2);
  const view = new DataView(out.buffer);
  const writeTag = (at: number, tag: string) => {
    for (let i = 0; i < 4; i++) view.setUint8(at + i, tag.charCodeAt(i));
  };
  writeTag(0, "RIFF");
  view.setUint32(4, 36 + n * 2, true);
  writeTag(8, "WAVE");
  writeTag(12, "fmt ");
  view.setUint32(16, 16, true);
  view.setUint16(20, 1, true); // PCM
  view.setUint16(22, 1, true); // mono
  view.setUint32(24, audio.sampleRate, true);
  view.setUint32(28, audio.sampleRate * 2, true);
  view.setUint16(32, 2, true);
  view.setUint16(34, 16, true);
  writeTag(36, "data");
  view.setUint32(40, n * 2, true);
  for (let i = 0; i < n; i++) {
    const clamped = Math.max(-1, Math.min(1, audio.samples[i]));
    view.setInt16(44 + i * 2, Math.round(clamped * 32767), true);
  }
  return out;
}

/** Deterministic 32-bit PRNG (mulberry32), good enough for test signals. */
export function seededRandom(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function synthesizeTone(freq: number, seconds: number, sampleRate: number): RawAudio {
  const n = Math.round(seconds * sampleRate);
  const samples = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    samples[i] = 0.6 * Math.sin((2 * Math.PI * freq * i) / sampleRate);
  }
  return { samples, sampleRate };
}

/**
 * Speech-like test clip: a pulse train at f0 shaped by fixed formant
 * resonators, with mild seeded jitter and noise so clips of one "speaker"
 * vary take to take.
 */
export function synthesizeVoice(
  f0: number,
  seconds: number,
  sampleRate: number,
  seed: number,
): RawAudio {
  const rand = seededRandom(seed);
  const n = Math.round(seconds * sampleRate);
  const excitation = new Float64Array(n);
  let phase = 0;
  const jitter = 0.97 + 0.06 * rand();
  for (let i = 0; i < n; i++) {
    const vibrato = 1 + 0.01 * Math.sin((2 * Math.PI * 5.2 * i) / sampleRate);
    phase += (f0 * jitter * vibrato) / sampleRate;
    if (phase >= 1) {
      phase -= 1;
      excitation[i] = 1;
    }
    excitation[i] += 0.02 * (rand() * 2 - 1); // aspiration noise
  }
  // Two-pole resonators at rough vowel formants.
  const formants: Array<[number, number]> = [
    [600 + 40 * rand(), 80],
    [1200 + 60 * rand(), 110],
    [2500 + 80 * rand(), 160],
  ];
  const out = new Float64Array(n);
  for (const [freq, bandwidth] of formants) {
    const r = Math.exp((-Math.PI * bandwidth) / sampleRate);
    const theta = (2 * Math.PI * freq) / sampleRate;
    const a1 = 2 * r * Math.cos(theta);
    const a2 = -r * r;
    let y1 = 0;
    let y2 = 0;
    for (let i = 0; i < n; i++) {
      const y = excitation[i] + a1 * y1 + a2 * y2;
      y2 = y1;
      y1 = y;
      out[i] += y;
    }
  }
  // Normalize to a fixed peak.
  let peak = 1e-9;
  for (let i = 0; i < n; i++) peak = Math.max(peak, Math.abs(out[i]));
  const gain = 0.7 / peak;
  for (let i = 0; i < n; i++) out[i] *= gain;
  return { samples: out, sampleRate };
}

/**
 * Pitch shift by resampled playback: all frequencies scale by `factor`,
 * duration scales by 1/factor. A crude effect, which is the point: it is
 * the classic cheap voice-disguise transform the impostor fixtures need.
 */
export function pitchShift(audio: RawAudio, factor: number): RawAudio {
  const n = Math.floor(audio.samples.length / factor);
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    const pos = i * factor;
    const left = Math.floor(pos);
    const frac = pos - left;
    const a = audio.samples[left] ?? 0;
    const b = audio.samples[left + 1] ?? a;
    out[i] = a + (b - a) * frac;
  }
  return { samples: out, sampleRate: audio.sampleRate };
}
