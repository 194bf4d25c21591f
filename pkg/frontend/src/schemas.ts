/**
 * Parsers for the run artifacts written by the sampling CLI.
 *
 * The schemas here are the documented output contract (idos.csv,
 * unperturbed.csv, slmc.csv, levels.jsonl, summary.json); any mismatch is
 * reported with the offending file and line number.
 */

import { readFileSync } from "fs";
import { z } from "zod";

export class SchemaError extends Error {
  constructor(file: string, line: number | null, detail: string) {
    super(line === null ? `${file}: ${detail}` : `${file}:${line}: ${detail}`);
    this.name = "SchemaError";
  }
}

export interface CurveTable {
  energy: number[];
  columns: Record<string, number[]>;
}

function parseNumericCsv(path: string, expectedHeader: string[]): CurveTable {
  const text = readFileSync(path, "utf-8");
  const lines = text.split("\n").filter((l) => l.length > 0);
  if (lines.length === 0) throw new SchemaError(path, 1, "empty file");
  const header = lines[0].split(",");
  if (JSON.stringify(header) !== JSON.stringify(expectedHeader)) {
    throw new SchemaError(
      path,
      1,
      `expected header '${expectedHeader.join(",")}', got '${lines[0]}'`,
    );
  }
  const columns: Record<string, number[]> = {};
  for (const name of header) columns[name] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== header.length) {
      throw new SchemaError(path, i + 1, `expected ${header.length} fields, got ${parts.length}`);
    }
    for (let j = 0; j < header.length; j++) {
      const v = Number(parts[j]);
      if (Number.isNaN(v) && parts[j].trim() !== "nan") {
        throw new SchemaError(path, i + 1, `field ${header[j]} is not a number: '${parts[j]}'`);
      }
      columns[header[j]].push(v);
    }
  }
  return { energy: columns[header[0]], columns };
}

export const IDOS_HEADER = ["energy_eV", "idos_mean", "idos_variance", "dos"];
export const UNPERTURBED_HEADER = ["energy_eV", "idos", "dos"];

export function readIdosCsv(path: string): CurveTable {
  return parseNumericCsv(path, IDOS_HEADER);
}

export function readUnperturbedCsv(path: string): CurveTable {
  return parseNumericCsv(path, UNPERTURBED_HEADER);
}

export function readSlmcCsv(path: string): CurveTable {
  return parseNumericCsv(path, IDOS_HEADER);
}

const levelRecord = z
  .object({
    level: z.number().int(),
    n: z.number().int().positive(),
    q: z.number().int().positive(),
    nsamples: z.number().int().positive(),
    mean_level_variance: z.number().nullable(),
    wall_time_s: z.number(),
    cache_hits: z.number().int(),
    variance_q: z.number().optional(),
    variance_diff: z.number().optional(),
    seconds_per_sample: z.number().optional(),
  })
  .strict();

export type LevelRecord = z.infer<typeof levelRecord>;

export function readLevels(path: string): LevelRecord[] {
  const lines = readFileSync(path, "utf-8")
    .split("\n")
    .filter((l) => l.length > 0);
  return lines.map((line, i) => {
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch (err) {
      throw new SchemaError(path, i + 1, `invalid JSON: ${(err as Error).message}`);
    }
    const parsed = levelRecord.safeParse(raw);
    if (!parsed.success) {
      throw new SchemaError(path, i + 1, parsed.error.issues.map((e) => e.message).join("; "));
    }
    return parsed.data;
  });
}

const rateFit = z.object({ value: z.number(), stderr: z.number().nullable() }).nullable();

const summarySchema = z
  .object({
    mode: z.string(),
    master_seed: z.number(),
    energy_grid: z.object({
      min: z.number(),
      max: z.number(),
      points: z.number().int(),
      step: z.number(),
    }),
    dos_step: z.number(),
    rates: z.object({ W: rateFit, S: rateFit, D: rateFit, C: rateFit }).nullable(),
    slmc_comparison: z
      .object({
        rescale_factor: z.number(),
        slmc_samples: z.number(),
        slmc_samples_needed: z.number(),
        work_ratio: z.number(),
      })
      .nullable(),
  })
  .loose();

export type Summary = z.infer<typeof summarySchema>;

export function readSummary(path: string): Summary {
  let raw: unknown;
  try {
    raw = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new SchemaError(path, null, `invalid JSON: ${(err as Error).message}`);
  }
  const parsed = summarySchema.safeParse(raw);
  if (!parsed.success) {
    throw new SchemaError(path, null, parsed.error.issues.map((e) => e.message).join("; "));
  }
  return parsed.data;
}
