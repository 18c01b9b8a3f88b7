import { parseArgs } from "node:util";

import { exportBank } from "./export.js";

const USAGE = `usage: export --source <checkpoint.safetensors|url> [--out-dir out]
       [--layer1-key features.0.weight] [--layer2-key features.2.weight]

Writes bank.zrw, golden_*.f32r conformance vectors, and manifest.txt.`;

export async function main(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      source: { type: "string" },
      "out-dir": { type: "string", default: "out" },
      "layer1-key": { type: "string" },
      "layer2-key": { type: "string" },
      help: { type: "boolean", default: false },
    },
  });
  if (values.help || !values.source) {
    console.log(USAGE);
    return values.help ? 0 : 2;
  }
  try {
    const manifest = await exportBank({
      source: values.source,
      outDir: values["out-dir"] as string,
      layer1Key: values["layer1-key"],
      layer2Key: values["layer2-key"],
    });
    console.log(`wrote ${values["out-dir"]}/bank.zrw (crc32 ${manifest.crc32})`);
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

main(process.argv.slice(2)).then((code) => {
  process.exitCode = code;
});
