/**
 * Extracts the first two convolution layers of a VGG-19 checkpoint in
 * safetensors form and writes the ".zrw" bank consumed by the
 * registration pipeline, golden conformance vectors, and a manifest.
 */

import { readFile, writeFile, mkdir } from "node:fs/promises";
import { join } from "node:path";

import { parseSafetensors, type TensorEntry } from "./safetensors.js";
import { convSameRelu } from "./conv.js";
import { encodeF32r } from "./f32r.js";
import { crc32, encodeZrw, type ConvLayer } from "./zrw.js";

export interface ExportOptions {
  source: string;
  outDir: string;
  layer1Key?: string;
  layer2Key?: string;
  goldenCount?: number;
  goldenSize?: number;
}

export interface ExportManifest {
  source: string;
  layers: { key: string; shape: number[] }[];
  crc32: string;
  goldenCount: number;
}

const EXPECTED_SHAPES: ReadonlyArray<ReadonlyArray<number>> = [
  [64, 3, 3, 3],
  [64, 64, 3, 3],
];

function shapesEqual(a: readonly number[], b: readonly number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

/**
 * Accepts [out][in][kh][kw] (checkpoint-native) directly, or
 * [kh][kw][in][out] layouts, which are transposed here; the consumer
 * never reorders.
 */
export function toLayer(weight: TensorEntry, bias: TensorEntry, index: 0 | 1): ConvLayer {
  const expected = EXPECTED_SHAPES[index];
  const hwio = [expected[2], expected[3], expected[1], expected[0]];
  let data = weight.data;
  let shape = weight.shape;

  if (shapesEqual(shape, hwio) && !shapesEqual(shape, expected)) {
    const [kh, kw, inC, outC] = shape;
    const transposed = new Float32Array(data.length);
    for (let y = 0; y < kh; y++) {
      for (let x = 0; x < kw; x++) {
        for (let i = 0; i < inC; i++) {
          for (let o = 0; o < outC; o++) {
            transposed[((o * inC + i) * kh + y) * kw + x] =
              data[((y * kw + x) * inC + i) * outC + o];
          }
        }
      }
    }
    data = transposed;
    shape = [outC, inC, kh, kw];
  }

  if (!shapesEqual(shape, expected)) {
    throw new Error(
      `layer ${index + 1} weights have shape [${weight.shape}]; expected ` +
      `[${expected}] (or its [kh][kw][in][out] transpose)`,
    );
  }
  if (bias.shape.length !== 1 || bias.shape[0] !== expected[0]) {
    throw new Error(`layer ${index + 1} bias must have shape [${expected[0]}], got [${bias.shape}]`);
  }
  return {
    weights: data,
    biases: bias.data,
    outChannels: expected[0],
    inChannels: expected[1],
    kh: expected[2],
    kw: expected[3],
  };
}

async function loadCheckpoint(source: string): Promise<ArrayBuffer> {
  if (/^https?:\/\//.test(source)) {
    let response: Response;
    try {
      response = await fetch(source);
    } catch (err) {
      throw new Error(`download failed for ${source}: ${String(err)}`);
    }
    if (!response.ok) {
      throw new Error(`download failed for ${source}: HTTP ${response.status}`);
    }
    return response.arrayBuffer();
  }
  const bytes = await readFile(source);
  return bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + bytes.byteLength);
}

/** Deterministic xorshift stream for the golden stimuli. */
export function goldenStimulus(seed: number, size: number): Float32Array {
  let state = (seed >>> 0) || 0x9e3779b9;
  const out = new Float32Array(size * size);
  for (let i = 0; i < out.length; i++) {
    state ^= state << 13;
    state >>>= 0;
    state ^= state >> 17;
    state ^= state << 5;
    state >>>= 0;
    out[i] = state / 0xffffffff;
  }
  return out;
}

function stackPlanes(planes: Float32Array[], size: number): Float32Array {
  const out = new Float32Array(planes.length * size * size);
  planes.forEach((plane, i) => out.set(plane, i * size * size));
  return out;
}

export async function exportBank(options: ExportOptions): Promise<ExportManifest> {
  const layer1Key = options.layer1Key ?? "features.0.weight";
  const layer2Key = options.layer2Key ?? "features.2.weight";
  const goldenCount = options.goldenCount ?? 5;
  const goldenSize = options.goldenSize ?? 8;

  const tensors = parseSafetensors(await loadCheckpoint(options.source));
  const pick = (key: string): TensorEntry => {
    const entry = tensors.get(key);
    if (!entry) {
      throw new Error(
        `tensor ${key} not found in ${options.source}; expected conv layers with ` +
        `shapes [64,3,3,3] and [64,64,3,3] (plus matching .bias entries)`,
      );
    }
    return entry;
  };
  const layer1 = toLayer(pick(layer1Key), pick(layer1Key.replace(/weight$/, "bias")), 0);
  const layer2 = toLayer(pick(layer2Key), pick(layer2Key.replace(/weight$/, "bias")), 1);

  const bank = encodeZrw([layer1, layer2]);
  await mkdir(options.outDir, { recursive: true });
  await writeFile(join(options.outDir, "bank.zrw"), bank);

  for (let i = 0; i < goldenCount; i++) {
    const stimulus = goldenStimulus(1000 + i, goldenSize);
    const replicated = Array.from({ length: layer1.inChannels }, () => stimulus);
    const first = convSameRelu(replicated, layer1, goldenSize, goldenSize);
    const second = convSameRelu(first, layer2, goldenSize, goldenSize);
    const tag = `golden_${String(i).padStart(2, "0")}`;
    await writeFile(join(options.outDir, `${tag}_input.f32r`),
      encodeF32r(stimulus, goldenSize, goldenSize));
    await writeFile(join(options.outDir, `${tag}_layer1.f32r`),
      encodeF32r(stackPlanes(first, goldenSize), goldenSize, first.length * goldenSize));
    await writeFile(join(options.outDir, `${tag}_layer2.f32r`),
      encodeF32r(stackPlanes(second, goldenSize), goldenSize, second.length * goldenSize));
  }

  const manifest: ExportManifest = {
    source: options.source,
    layers: [
      { key: layer1Key, shape: [64, 3, 3, 3] },
      { key: layer2Key, shape: [64, 64, 3, 3] },
    ],
    crc32: crc32(bank.subarray(0, bank.length - 4)).toString(16).padStart(8, "0"),
    goldenCount,
  };
  const lines = [
    `source = ${manifest.source}`,
    `layer1 = ${layer1Key} [64,3,3,3] + bias [64]`,
    `layer2 = ${layer2Key} [64,64,3,3] + bias [64]`,
    `crc32 = ${manifest.crc32}`,
    `golden_vectors = ${goldenCount} stimuli of ${goldenSize}x${goldenSize}`,
  ];
  await writeFile(join(options.outDir, "manifest.txt"), lines.join("\n") + "\n");
  return manifest;
}
