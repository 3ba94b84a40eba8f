/**
 * Signal-processing frontend: windowed-sinc resampling and log-mel
 * spectrogram frames. Everything is plain double math so two runs over the
 * same input are bitwise identical.
 */

import { RawAudio } from "./audio.js";

/** Band-limited resampler (Hann-windowed sinc, 32 taps per side). */
export function resample(audio: RawAudio, targetRate: number): RawAudio {
  if (audio.sampleRate === targetRate) {
    return audio;
  }
  const ratio = audio.sampleRate / targetRate;
  const cutoff = 0.95 * Math.min(1, 1 / ratio); // fraction of input Nyquist
  const taps = 32;
  const n = Math.floor(audio.samples.length / ratio);
  const out = new Float64Array(n);
  const input = audio.samples;
  for (let i = 0; i < n; i++) {
    const center = i * ratio;
    const lo = Math.max(0, Math.ceil(center - taps));
    const hi = Math.min(input.length - 1, Math.floor(center + taps));
    let acc = 0;
    let norm = 0;
    for (let j = lo; j <= hi; j++) {
      const x = j - center;
      const sinc = x === 0 ? cutoff : Math.sin(Math.PI * cutoff * x) / (Math.PI * x);
      const window = 0.5 + 0.5 * Math.cos((Math.PI * x) / taps);
      const w = sinc * window;
      acc += input[j] * w;
      norm += w;
    }
    out[i] = norm !== 0 ? acc / norm : 0;
  }
  return { samples: out, sampleRate: targetRate };
}

/** In-place iterative radix-2 FFT over interleaved re/im arrays. */
export function fft(re: Float64Array, im: Float64Array): void {
  const n = re.length;
  if ((n & (n - 1)) !== 0) {
    throw new Error(`FFT size must be a power of two, got ${n}`);
  }
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      [re[i], re[j]] = [re[j], re[i]];
      [im[i], im[j]] = [im[j], im[i]];
    }
  }
  for (let len = 2; len <= n; len <<= 1) {
    const angle = (-2 * Math.PI) / len;
    const wRe = Math.cos(angle);
    const wIm = Math.sin(angle);
    for (let i = 0; i < n; i += len) {
      let curRe = 1;
      let curIm = 0;
      for (let j = 0; j < len / 2; j++) {
        const aRe = re[i + j];
        const aIm = im[i + j];
        const bRe = re[i + j + len / 2] * curRe - im[i + j + len / 2] * curIm;
        const bIm = re[i + j + len / 2] * curIm + im[i + j + len / 2] * curRe;
        re[i + j] = aRe + bRe;
        im[i + j] = aIm + bIm;
        re[i + j + len / 2] = aRe - bRe;
        im[i + j + len / 2] = aIm - bIm;
        const nextRe = curRe * wRe - curIm * wIm;
        curIm = curRe * wIm + curIm * wRe;
        curRe = nextRe;
      }
    }
  }
}

export interface MelConfig {
  sampleRate: number;
  nMels: number;
  windowSamples: number;
  hopSamples: number;
  fMin: number;
  fMax: number; // 0 means Nyquist
}

const hzToMel = (hz: number) => 2595 * Math.log10(1 + hz / 700);
const melToHz = (mel: number) => 700 * (10 ** (mel / 2595) - 1);

export function melFilterbank(cfg: MelConfig, fftSize: number): Float64Array[] {
  const fMax = cfg.fMax > 0 ? cfg.fMax : cfg.sampleRate / 2;
  const nBins = fftSize / 2 + 1;
  const melPoints = new Float64Array(cfg.nMels + 2);
  const melLo = hzToMel(cfg.fMin);
  const melHi = hzToMel(fMax);
  for (let i = 0; i < melPoints.length; i++) {
    melPoints[i] = melToHz(melLo + ((melHi - melLo) * i) / (cfg.nMels + 1));
  }
  const binOf = (hz: number) => (hz * fftSize) / cfg.sampleRate;
  const bank: Float64Array[] = [];
  for (let m = 0; m < cfg.nMels; m++) {
    const filt = new Float64Array(nBins);
    const lo = binOf(melPoints[m]);
    const mid = binOf(melPoints[m + 1]);
    const hi = binOf(melPoints[m + 2]);
    for (let b = Math.max(0, Math.floor(lo)); b < Math.min(nBins, Math.ceil(hi)); b++) {
      if (b >= lo && b <= mid && mid > lo) {
        filt[b] = (b - lo) / (mid - lo);
      } else if (b > mid && b <= hi && hi > mid) {
        filt[b] = (hi - b) / (hi - mid);
      }
    }
    bank.push(filt);
  }
  return bank;
}

function nextPow2(x: number): number {
  let n = 1;
  while (n < x) n <<= 1;
  return n;
}

/** Log-mel frames, one Float64Array of nMels per hop. */
export function logMelFrames(audio: RawAudio, cfg: MelConfig): Float64Array[] {
  if (audio.sampleRate !== cfg.sampleRate) {
    throw new Error(`expected ${cfg.sampleRate} Hz input, got ${audio.sampleRate}`);
  }
  const fftSize = nextPow2(cfg.windowSamples);
  const bank = melFilterbank(cfg, fftSize);
  const hann = new Float64Array(cfg.windowSamples);
  for (let i = 0; i < cfg.windowSamples; i++) {
    hann[i] = 0.5 - 0.5 * Math.cos((2 * Math.PI * i) / (cfg.windowSamples - 1));
  }
  const frames: Float64Array[] = [];
  const re = new Float64Array(fftSize);
  const im = new Float64Array(fftSize);
  for (let start = 0; start + cfg.windowSamples <= audio.samples.length; start += cfg.hopSamples) {
    re.fill(0);
    im.fill(0);
    for (let i = 0; i < cfg.windowSamples; i++) {
      re[i] = audio.samples[start + i] * hann[i];
    }
    fft(re, im);
    const frame = new Float64Array(cfg.nMels);
    for (let m = 0; m < cfg.nMels; m++) {
      const filt = bank[m];
      let acc = 0;
      for (let b = 0; b < filt.length; b++) {
        if (filt[b] !== 0) {
          acc += filt[b] * (re[b] * re[b] + im[b] * im[b]);
        }
      }
      frame[m] = Math.log(acc + 1e-10);
    }
    frames.push(frame);
  }
  if (frames.length === 0) {
    throw new Error(
      `clip too short: ${audio.samples.length} samples < window ${cfg.windowSamples}`,
    );
  }
  return frames;
}
