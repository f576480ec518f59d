// Minimal RIFF/WAV reader for the service's pcm16 renders, plus base64 glue
// that works in both the browser and node test runs.

export interface DecodedWav {
  sampleRate: number;
  samples: Float32Array; // first channel, scaled to [-1, 1]
  numChannels: number;
}

export function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  const buf = Buffer.from(b64, "base64");
  return new Uint8Array(buf.buffer, buf.byteOffset, buf.byteLength);
}

export function parseWav(bytes: Uint8Array): DecodedWav {
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  if (bytes.length < 12 || readTag(view, 0) !== "RIFF" || readTag(view, 8) !== "WAVE") {
    throw new Error("not a RIFF/WAVE file");
  }
  let sampleRate = 0;
  let numChannels = 0;
  let bitsPerSample = 0;
  let samples: Float32Array | null = null;
  let pos = 12;
  while (pos + 8 <= bytes.length) {
    const tag = readTag(view, pos);
    const size = view.getUint32(pos + 4, true);
    const body = pos + 8;
    if (tag === "fmt ") {
      const format = view.getUint16(body, true);
      if (format !== 1) throw new Error(`unsupported WAV format code ${format}`);
      numChannels = view.getUint16(body + 2, true);
      sampleRate = view.getUint32(body + 4, true);
      bitsPerSample = view.getUint16(body + 14, true);
    } else if (tag === "data") {
      if (bitsPerSample !== 16) throw new Error(`expected 16-bit samples, got ${bitsPerSample}`);
      const frameCount = Math.floor(size / (2 * numChannels));
      samples = new Float32Array(frameCount);
      for (let i = 0; i < frameCount; i++) {
        samples[i] = view.getInt16(body + i * 2 * numChannels, true) / 32768;
      }
    }
    pos = body + size + (size % 2); // chunks are word-aligned
  }
  if (!samples || sampleRate === 0) throw new Error("WAV file has no fmt/data chunks");
  return { sampleRate, samples, numChannels };
}

function readTag(view: DataView, offset: number): string {
  return String.fromCharCode(
    view.getUint8(offset),
    view.getUint8(offset + 1),
    view.getUint8(offset + 2),
    view.getUint8(offset + 3),
  );
}

export function decodeWavB64(b64: string): DecodedWav {
  return parseWav(base64ToBytes(b64));
}
