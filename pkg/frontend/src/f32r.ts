/**
 * Raw float raster ".f32r": magic "F32R", width and height (u32 LE),
 * then width*height f32 LE samples, row-major.
 */

export function encodeF32r(samples: Float32Array, width: number, height: number): Uint8Array {
  if (samples.length !== width * height) {
    throw new Error(`sample count ${samples.length} != ${width}x${height}`);
  }
  const out = new Uint8Array(12 + 4 * samples.length);
  const view = new DataView(out.buffer);
  out.set([0x46, 0x33, 0x32, 0x52], 0); // "F32R"
  view.setUint32(4, width, true);
  view.setUint32(8, height, true);
  for (let i = 0; i < samples.length; i++) {
    view.setFloat32(12 + 4 * i, samples[i], true);
  }
  return out;
}

export function decodeF32r(bytes: Uint8Array): { width: number; height: number; samples: Float32Array } {
  if (bytes.length < 12 || bytes[0] !== 0x46 || bytes[1] !== 0x33 || bytes[2] !== 0x32 || bytes[3] !== 0x52) {
    throw new Error("f32r: bad magic");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const width = view.getUint32(4, true);
  const height = view.getUint32(8, true);
  if (bytes.length !== 12 + 4 * width * height) {
    throw new Error("f32r: truncated payload");
  }
  const samples = new Float32Array(width * height);
  for (let i = 0; i < samples.length; i++) {
    samples[i] = view.getFloat32(12 + 4 * i, true);
  }
  return { width, height, samples };
}
