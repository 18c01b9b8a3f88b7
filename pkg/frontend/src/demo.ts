/** Writes a synthetic checkpoint and exports it to out/. */

import { mkdir, writeFile } from "node:fs/promises";

import { exportBank } from "./export.js";
import { makeSyntheticCheckpoint } from "./fixture.js";

async function main(): Promise<void> {
  await mkdir("out", { recursive: true });
  const source = "out/synthetic-vgg19.safetensors";
  await writeFile(source, Buffer.from(makeSyntheticCheckpoint(7)));
  const manifest = await exportBank({ source, outDir: "out" });
  console.log(`exported synthetic checkpoint, crc32 ${manifest.crc32}`);
}

main();
