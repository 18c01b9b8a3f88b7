/**
 * Minimal safetensors reader: an 8-byte little-endian header length,
 * a JSON header mapping tensor names to {dtype, shape, data_offsets},
 * then the raw tensor payload.
 */

export interface TensorEntry {
  dtype: string;
  shape: number[];
  data: Float32Array;
}

interface HeaderEntry {
  dtype: string;
  shape: number[];
  data_offsets: [number, number];
}

export function parseSafetensors(buffer: ArrayBuffer): Map<string, TensorEntry> {
  if (buffer.byteLength < 8) {
    throw new Error("safetensors: file shorter than its header length field");
  }
  const view = new DataView(buffer);
  const headerLen = Number(view.getBigUint64(0, true));
  if (8 + headerLen > buffer.byteLength) {
    throw new Error("safetensors: header length exceeds file size");
  }
  const headerText = new TextDecoder().decode(new Uint8Array(buffer, 8, headerLen));
  let header: Record<string, HeaderEntry>;
  try {
    header = JSON.parse(headerText);
  } catch (err) {
    throw new Error(`safetensors: invalid JSON header (${String(err)})`);
  }

  const dataStart = 8 + headerLen;
  const tensors = new Map<string, TensorEntry>();
  for (const [name, entry] of Object.entries(header)) {
    if (name === "__metadata__") continue;
    const [begin, end] = entry.data_offsets;
    if (begin < 0 || dataStart + end > buffer.byteLength || end < begin) {
      throw new Error(`safetensors: tensor ${name} offsets out of range`);
    }
    if (entry.dtype !== "F32") {
      throw new Error(`safetensors: tensor ${name} has dtype ${entry.dtype}, only F32 is supported`);
    }
    const count = (end - begin) / 4;
    const expected = entry.shape.reduce((a, b) => a * b, 1);
    if (count !== expected) {
      throw new Error(`safetensors: tensor ${name} payload (${count}) does not match shape ${JSON.stringify(entry.shape)}`);
    }
    // copy so the result does not alias the input buffer
    const data = new Float32Array(buffer.slice(dataStart + begin, dataStart + end));
    tensors.set(name, { dtype: entry.dtype, shape: entry.shape, data });
  }
  return tensors;
}

/** Serialize F32 tensors into a safetensors buffer (used by tests). */
export function buildSafetensors(tensors: Map<string, { shape: number[]; data: Float32Array }>): ArrayBuffer {
  const header: Record<string, HeaderEntry> = {};
  let offset = 0;
  const chunks: Float32Array[] = [];
  for (const [name, t] of tensors) {
    const bytes = t.data.length * 4;
    header[name] = { dtype: "F32", shape: t.shape, data_offsets: [offset, offset + bytes] };
    offset += bytes;
    chunks.push(t.data);
  }
  const headerBytes = new TextEncoder().encode(JSON.stringify(header));
  const buffer = new ArrayBuffer(8 + headerBytes.length + offset);
  new DataView(buffer).setBigUint64(0, BigInt(headerBytes.length), true);
  new Uint8Array(buffer, 8, headerBytes.length).set(headerBytes);
  let cursor = 8 + headerBytes.length;
  for (const chunk of chunks) {
    new Uint8Array(buffer, cursor, chunk.length * 4).set(new Uint8Array(chunk.buffer, chunk.byteOffset, chunk.length * 4));
    cursor += chunk.length * 4;
  }
  return buffer;
}
