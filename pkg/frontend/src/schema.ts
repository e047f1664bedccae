/**
 * Versioned input schemas: the long-format runs CSV and per-seed run records.
 * Any mismatch throws SchemaError naming the offending column or field; the
 * CLI maps that to exit code 1.
 */

import * as fs from "fs";
import * as path from "path";

export const SCHEMA_VERSION = 1;

export const CSV_COLUMNS = [
  "seed",
  "algo",
  "benchmark",
  "batch_index",
  "metric",
  "value",
] as const;

export const METRIC_HIGHER_IS_BETTER: Record<string, boolean> = {
  rmse: false,
  nll: false,
  inferred_value: true,
  in_sample_best: true,
};

export const TIMING_PHASES = ["fit_initial", "acq_opt", "fit_bo", "bo_opt"] as const;

export class SchemaError extends Error {}

export interface MetricRow {
  seed: number;
  algo: string;
  benchmark: string;
  batch_index: number;
  metric: string;
  value: number;
}

export interface RunRecord {
  schema_version: number;
  seed: number;
  algo: string;
  benchmark: string;
  status: string;
  timings: Record<string, number>;
  batches: Array<{
    index: number;
    ensemble?: { lengthscales?: Record<string, number[]> };
  }>;
}

export function parseRunsCsv(text: string, source: string): MetricRow[] {
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`${source}: empty CSV (missing header)`);
  }
  const header = lines[0].split(",");
  const expected = CSV_COLUMNS as readonly string[];
  for (const col of expected) {
    if (!header.includes(col)) {
      throw new SchemaError(`${source}: missing column '${col}'`);
    }
  }
  for (const col of header) {
    if (!expected.includes(col)) {
      throw new SchemaError(`${source}: unexpected column '${col}'`);
    }
  }
  const idx = expected.map((col) => header.indexOf(col));
  const rows: MetricRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== header.length) {
      throw new SchemaError(`${source}:${i + 1}: expected ${header.length} fields`);
    }
    const seed = Number(parts[idx[0]]);
    const batch = Number(parts[idx[3]]);
    const value = Number(parts[idx[5]]);
    if (!Number.isInteger(seed)) {
      throw new SchemaError(`${source}:${i + 1}: column 'seed' is not an integer`);
    }
    if (!Number.isInteger(batch)) {
      throw new SchemaError(`${source}:${i + 1}: column 'batch_index' is not an integer`);
    }
    if (!Number.isFinite(value)) {
      throw new SchemaError(`${source}:${i + 1}: column 'value' is not a number`);
    }
    rows.push({
      seed,
      algo: parts[idx[1]],
      benchmark: parts[idx[2]],
      batch_index: batch,
      metric: parts[idx[4]],
      value,
    });
  }
  return rows;
}

export function parseRunRecord(text: string, source: string): RunRecord {
  let payload: unknown;
  try {
    payload = JSON.parse(text);
  } catch (err) {
    throw new SchemaError(`${source}: invalid JSON (${(err as Error).message})`);
  }
  const record = payload as Partial<RunRecord>;
  if (record.schema_version !== SCHEMA_VERSION) {
    throw new SchemaError(
      `${source}: field 'schema_version' mismatch (expected ${SCHEMA_VERSION}, ` +
        `got ${record.schema_version})`
    );
  }
  for (const field of ["seed", "algo", "benchmark", "status", "timings"]) {
    if (!(field in record)) {
      throw new SchemaError(`${source}: missing field '${field}'`);
    }
  }
  return record as RunRecord;
}

export interface LoadedInputs {
  rows: MetricRow[];
  records: RunRecord[];
}

/** Collect runs.csv / run_*.json from files or directories (one level of
 * algo subdirectories is typical). */
export function loadInputs(paths: string[]): LoadedInputs {
  const csvFiles: string[] = [];
  const jsonFiles: string[] = [];
  const visit = (p: string, depth: number) => {
    const stat = fs.statSync(p);
    if (stat.isDirectory()) {
      if (depth > 2) return;
      for (const entry of fs.readdirSync(p).sort()) {
        visit(path.join(p, entry), depth + 1);
      }
    } else if (p.endsWith("runs.csv")) {
      csvFiles.push(p);
    } else if (/run_[^/]*\.json$/.test(p)) {
      jsonFiles.push(p);
    }
  };
  for (const p of paths) {
    if (!fs.existsSync(p)) {
      throw new SchemaError(`input path does not exist: ${p}`);
    }
    visit(p, 0);
  }
  const rows = csvFiles.flatMap((f) => parseRunsCsv(fs.readFileSync(f, "utf-8"), f));
  const records = jsonFiles.map((f) => parseRunRecord(fs.readFileSync(f, "utf-8"), f));
  return { rows, records };
}
