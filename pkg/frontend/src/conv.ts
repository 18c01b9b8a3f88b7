/**
 * Reference convolution matching the consumer's semantics: stride 1,
 * "same" zero padding, cross-correlation, bias, rectifier. Used to
 * produce the golden stimulus/response vectors shipped with a bank.
 */

import type { ConvLayer } from "./zrw.js";

/** maps: [channels][h*w] row-major; returns [outChannels][h*w]. */
export function convSameRelu(
  maps: Float32Array[],
  layer: ConvLayer,
  height: number,
  width: number,
): Float32Array[] {
  if (maps.length !== layer.inChannels) {
    throw new Error(`expected ${layer.inChannels} input maps, got ${maps.length}`);
  }
  const { kh, kw } = layer;
  const padY = (kh - 1) >> 1;
  const padX = (kw - 1) >> 1;
  const out: Float32Array[] = [];
  for (let oc = 0; oc < layer.outChannels; oc++) {
    const plane = new Float32Array(height * width);
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        let acc = layer.biases[oc];
        for (let ic = 0; ic < layer.inChannels; ic++) {
          const src = maps[ic];
          const wBase = ((oc * layer.inChannels + ic) * kh) * kw;
          for (let ky = 0; ky < kh; ky++) {
            const sy = y + ky - padY;
            if (sy < 0 || sy >= height) continue;
            for (let kx = 0; kx < kw; kx++) {
              const sx = x + kx - padX;
              if (sx < 0 || sx >= width) continue;
              acc += layer.weights[wBase + ky * kw + kx] * src[sy * width + sx];
            }
          }
        }
        plane[y * width + x] = acc > 0 ? acc : 0;
      }
    }
    out.push(plane);
  }
  return out;
}

/** Grayscale input replicated across the first layer's channels. */
export function runTwoLayers(
  image: Float32Array,
  height: number,
  width: number,
  layer1: ConvLayer,
  layer2: ConvLayer,
): { layer1: Float32Array[]; layer2: Float32Array[] } {
  const replicated: Float32Array[] = [];
  for (let c = 0; c < layer1.inChannels; c++) replicated.push(image);
  const first = convSameRelu(replicated, layer1, height, width);
  const second = convSameRelu(first, layer2, height, width);
  return { layer1: first, layer2: second };
}
