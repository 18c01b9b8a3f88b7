/**
 * Synthetic VGG-19-shaped checkpoint for tests and demos. Pretrained
 * weights are not fetchable in offline environments; this produces a
 * schema-identical safetensors file with seeded values so the export
 * path and its consumers can be exercised end to end.
 */

import { buildSafetensors } from "./safetensors.js";

function stream(seed: number, length: number): Float32Array {
  let state = (seed >>> 0) || 1;
  const out = new Float32Array(length);
  for (let i = 0; i < length; i++) {
    state ^= state << 13;
    state >>>= 0;
    state ^= state >> 17;
    state ^= state << 5;
    state >>>= 0;
    out[i] = (state / 0xffffffff - 0.5) * 0.5;
  }
  return out;
}

export function makeSyntheticCheckpoint(seed = 7, layout: "oihw" | "hwio" = "oihw"): ArrayBuffer {
  const w1 = stream(seed, 64 * 3 * 3 * 3);
  const b1 = stream(seed + 1, 64);
  const w2 = stream(seed + 2, 64 * 64 * 3 * 3);
  const b2 = stream(seed + 3, 64);

  const tensors = new Map<string, { shape: number[]; data: Float32Array }>();
  if (layout === "oihw") {
    tensors.set("features.0.weight", { shape: [64, 3, 3, 3], data: w1 });
    tensors.set("features.2.weight", { shape: [64, 64, 3, 3], data: w2 });
  } else {
    tensors.set("features.0.weight", { shape: [3, 3, 3, 64], data: transpose(w1, 64, 3) });
    tensors.set("features.2.weight", { shape: [3, 3, 64, 64], data: transpose(w2, 64, 64) });
  }
  tensors.set("features.0.bias", { shape: [64], data: b1 });
  tensors.set("features.2.bias", { shape: [64], data: b2 });
  return buildSafetensors(tensors);
}

/** [out][in][3][3] -> [3][3][in][out] */
function transpose(oihw: Float32Array, outC: number, inC: number): Float32Array {
  const hwio = new Float32Array(oihw.length);
  for (let o = 0; o < outC; o++) {
    for (let i = 0; i < inC; i++) {
      for (let y = 0; y < 3; y++) {
        for (let x = 0; x < 3; x++) {
          hwio[((y * 3 + x) * inC + i) * outC + o] = oihw[((o * inC + i) * 3 + y) * 3 + x];
        }
      }
    }
  }
  return hwio;
}
