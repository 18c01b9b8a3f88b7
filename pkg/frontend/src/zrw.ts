/**
 * Writer for the ".zrw" filter bank format: magic "ZRW1", layer count
 * (u32 LE), per layer out/in/kh/kw (u32 LE), weights in
 * [out][in][kh][kw] order then biases (f32 LE), trailing CRC32 of all
 * preceding bytes.
 */

export interface ConvLayer {
  /** [out][in][kh][kw], flat */
  weights: Float32Array;
  biases: Float32Array;
  outChannels: number;
  inChannels: number;
  kh: number;
  kw: number;
}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(bytes: Uint8Array): number {
  let crc = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    crc = CRC_TABLE[(crc ^ bytes[i]) & 0xff] ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}

export function encodeZrw(layers: ConvLayer[]): Uint8Array {
  let size = 4 + 4;
  for (const layer of layers) {
    size += 16 + 4 * (layer.weights.length + layer.biases.length);
  }
  size += 4;

  const out = new Uint8Array(size);
  const view = new DataView(out.buffer);
  out.set([0x5a, 0x52, 0x57, 0x31], 0); // "ZRW1"
  view.setUint32(4, layers.length, true);
  let offset = 8;
  for (const layer of layers) {
    const expected = layer.outChannels * layer.inChannels * layer.kh * layer.kw;
    if (layer.weights.length !== expected) {
      throw new Error(`layer weight count ${layer.weights.length} != ${expected}`);
    }
    if (layer.biases.length !== layer.outChannels) {
      throw new Error(`layer bias count ${layer.biases.length} != ${layer.outChannels}`);
    }
    view.setUint32(offset, layer.outChannels, true);
    view.setUint32(offset + 4, layer.inChannels, true);
    view.setUint32(offset + 8, layer.kh, true);
    view.setUint32(offset + 12, layer.kw, true);
    offset += 16;
    for (const value of layer.weights) {
      view.setFloat32(offset, value, true);
      offset += 4;
    }
    for (const value of layer.biases) {
      view.setFloat32(offset, value, true);
      offset += 4;
    }
  }
  view.setUint32(offset, crc32(out.subarray(0, offset)), true);
  return out;
}
