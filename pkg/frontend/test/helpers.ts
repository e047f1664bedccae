import * as fs from "fs";
import * as path from "path";
import { fileURLToPath } from "url";

const here = path.dirname(fileURLToPath(import.meta.url));

export const FIXTURES = path.resolve(here, "..", "..", "tests", "fixtures");

export function fixturePath(name: string): string {
  return path.join(FIXTURES, name);
}

export function fixtureText(name: string): string {
  return fs.readFileSync(fixturePath(name), "utf-8");
}

export function sampleRunRecord(seed: number, algo: string, overrides: object = {}) {
  return {
    schema_version: 1,
    seed,
    algo,
    benchmark: "bench",
    mode: "al",
    config: {},
    status: "ok",
    error: null,
    batches: [
      {
        index: 0,
        design: [[0.5, 0.5]],
        metrics: { rmse: 1.0, nll: 2.0 },
        ensemble: { lengthscales: { "0.5": [0.4, 2.0] }, m: 4 },
      },
    ],
    timings: { fit_initial: 1.0 + seed, acq_opt: 2.0, fit_bo: 3.0, bo_opt: 0.0 },
    ...overrides,
  };
}
