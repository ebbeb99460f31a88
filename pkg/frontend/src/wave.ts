/**
 * Minimal WAV decoding for the audio served by the review service
 * (mono PCM16 or float32 slices). Decoding here avoids depending on
 * AudioContext for drawing, which keeps the waveform path testable.
 */

export interface DecodedWav {
  sampleRate: number;
  samples: Float32Array;
}

export function decodeWav(buffer: ArrayBuffer): DecodedWav {
  const view = new DataView(buffer);
  if (buffer.byteLength < 44 || readTag(view, 0) !== 'RIFF' || readTag(view, 8) !== 'WAVE') {
    throw new Error('not a RIFF/WAVE buffer');
  }
  let offset = 12;
  let format = 0;
  let channels = 1;
  let sampleRate = 0;
  let bits = 0;
  let dataOffset = -1;
  let dataLength = 0;
  while (offset + 8 <= buffer.byteLength) {
    const tag = readTag(view, offset);
    const size = view.getUint32(offset + 4, true);
    if (tag === 'fmt ') {
      format = view.getUint16(offset + 8, true);
      channels = view.getUint16(offset + 10, true);
      sampleRate = view.getUint32(offset + 12, true);
      bits = view.getUint16(offset + 22, true);
    } else if (tag === 'data') {
      dataOffset = offset + 8;
      dataLength = size;
    }
    offset += 8 + size + (size & 1);
  }
  if (dataOffset < 0 || sampleRate === 0) throw new Error('missing fmt or data chunk');

  let samples: Float32Array;
  if (format === 1 && bits === 16) {
    const n = Math.floor(dataLength / 2);
    samples = new Float32Array(n);
    for (let i = 0; i < n; i++) {
      samples[i] = view.getInt16(dataOffset + 2 * i, true) / 32768;
    }
  } else if (format === 3 && bits === 32) {
    const n = Math.floor(dataLength / 4);
    samples = new Float32Array(n);
    for (let i = 0; i < n; i++) {
      samples[i] = view.getFloat32(dataOffset + 4 * i, true);
    }
  } else {
    throw new Error(`unsupported encoding: format ${format} at ${bits} bit`);
  }

  if (channels > 1) {
    const frames = Math.floor(samples.length / channels);
    const mono = new Float32Array(frames);
    for (let i = 0; i < frames; i++) mono[i] = samples[i * channels]!;
    samples = mono;
  }
  return { sampleRate, samples };
}

function readTag(view: DataView, offset: number): string {
  return String.fromCharCode(
    view.getUint8(offset),
    view.getUint8(offset + 1),
    view.getUint8(offset + 2),
    view.getUint8(offset + 3)
  );
}
