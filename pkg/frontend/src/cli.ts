#!/usr/bin/env node
/**
 * figures <kind> --in DIR --out FILE.png [--window LO,HI]
 *
 * kinds: idos | var | conv | dos.  DIR is an output directory of the
 * sampling CLI (idos.csv, levels.jsonl, summary.json, ...).
 */

import { FIGURE_KINDS, FigureKind } from "./charts";
import { SchemaError } from "./schemas";
import { render } from "./render";

function usage(): never {
  console.error("usage: figures <idos|var|conv|dos> --in DIR --out FILE.png [--window LO,HI]");
  process.exit(2);
}

function parseArgs(argv: string[]) {
  if (argv.length === 0) usage();
  const kind = argv[0] as FigureKind;
  if (!FIGURE_KINDS.includes(kind)) {
    console.error(`unknown figure kind '${argv[0]}'`);
    usage();
  }
  let inputDir: string | null = null;
  let outPath: string | null = null;
  let window: [number, number] | undefined;
  for (let i = 1; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (value === undefined) usage();
    if (key === "--in") inputDir = value;
    else if (key === "--out") outPath = value;
    else if (key === "--window") {
      const parts = value.split(",").map(Number);
      if (parts.length !== 2 || parts.some(Number.isNaN)) usage();
      window = [parts[0], parts[1]];
    } else usage();
  }
  if (!inputDir || !outPath) usage();
  return { kind, inputDir, outPath, window };
}

async function main() {
  const job = parseArgs(process.argv.slice(2));
  try {
    const figure = await render(job);
    const notes = Object.entries(figure.annotations)
      .map(([k, v]) => `${k}=${v.toFixed(4)}`)
      .join(" ");
    console.log(`wrote ${job.outPath}${notes ? " (" + notes + ")" : ""}`);
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(err.message);
      process.exit(2);
    }
    throw err;
  }
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
