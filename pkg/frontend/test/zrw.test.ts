import { describe, expect, it } from "vitest";

import { crc32, encodeZrw, type ConvLayer } from "../src/zrw.js";

function tinyLayer(outC: number, inC: number): ConvLayer {
  const weights = new Float32Array(outC * inC * 9).map((_, i) => i * 0.01);
  const biases = new Float32Array(outC).map((_, i) => -i * 0.1);
  return { weights, biases, outChannels: outC, inChannels: inC, kh: 3, kw: 3 };
}

describe("zrw encoding", () => {
  it("writes magic, layer headers, payload, and a valid trailing crc", () => {
    const bytes = encodeZrw([tinyLayer(2, 1), tinyLayer(3, 2)]);
    expect(Array.from(bytes.subarray(0, 4))).toEqual([0x5a, 0x52, 0x57, 0x31]);
    const view = new DataView(bytes.buffer);
    expect(view.getUint32(4, true)).toBe(2);
    expect(view.getUint32(8, true)).toBe(2); // out
    expect(view.getUint32(12, true)).toBe(1); // in
    expect(view.getUint32(16, true)).toBe(3); // kh
    expect(view.getUint32(20, true)).toBe(3); // kw
    const stored = view.getUint32(bytes.length - 4, true);
    expect(stored).toBe(crc32(bytes.subarray(0, bytes.length - 4)));
  });

  it("is deterministic", () => {
    const a = encodeZrw([tinyLayer(2, 1)]);
    const b = encodeZrw([tinyLayer(2, 1)]);
    expect(Buffer.from(a).equals(Buffer.from(b))).toBe(true);
  });

  it("rejects mismatched weight counts", () => {
    const bad = tinyLayer(2, 1);
    bad.weights = bad.weights.subarray(0, 5);
    expect(() => encodeZrw([bad])).toThrow(/weight count/);
  });

  it("matches the reference crc32 of known input", () => {
    // "123456789" has the canonical CRC-32 0xcbf43926
    const bytes = new TextEncoder().encode("123456789");
    expect(crc32(bytes)).toBe(0xcbf43926);
  });
});
