/**
 * report CLI: render paper-style figures from runs.csv / run_<seed>.json.
 *
 *   hipe-report --in DIR [--in DIR2 ...] --kind curves --metric nll --out fig.svg
 *
 * Kinds: curves | ranks | timing | lengthscales. Output format follows the
 * --out extension (.svg or .png); --format overrides. Exit codes: 0 success,
 * 1 schema/config error (offending column or field named), 2 runtime error.
 */

import * as fs from "fs";

import { render, FigureKind } from "./figures.js";
import { loadInputs, SchemaError } from "./schema.js";

interface Args {
  inputs: string[];
  kind: FigureKind;
  metric: string;
  out: string;
  format: "svg" | "png";
}

const KINDS = ["curves", "ranks", "timing", "lengthscales"];

function parseArgs(argv: string[]): Args {
  const args: Partial<Args> & { inputs: string[] } = { inputs: [] };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const value = () => {
      if (i + 1 >= argv.length) throw new SchemaError(`flag ${flag} needs a value`);
      return argv[++i];
    };
    switch (flag) {
      case "--in":
        args.inputs.push(value());
        break;
      case "--kind":
        args.kind = value() as FigureKind;
        break;
      case "--metric":
        args.metric = value();
        break;
      case "--out":
        args.out = value();
        break;
      case "--format":
        args.format = value() as "svg" | "png";
        break;
      default:
        throw new SchemaError(`unknown flag '${flag}'`);
    }
  }
  if (args.inputs.length === 0) throw new SchemaError("--in is required");
  if (!args.kind || !KINDS.includes(args.kind)) {
    throw new SchemaError(`--kind must be one of ${KINDS.join(", ")}`);
  }
  if (!args.out) throw new SchemaError("--out is required");
  if ((args.kind === "curves" || args.kind === "ranks") && !args.metric) {
    throw new SchemaError(`--metric is required for kind '${args.kind}'`);
  }
  if (!args.format) {
    args.format = args.out.endsWith(".png") ? "png" : "svg";
  }
  return args as Args;
}

async function toPng(svgText: string): Promise<Buffer> {
  const { Resvg } = await import("@resvg/resvg-js");
  return new Resvg(svgText).render().asPng();
}

export async function main(argv: string[]): Promise<number> {
  try {
    const args = parseArgs(argv);
    const inputs = loadInputs(args.inputs);
    const result = render(args.kind, inputs, args.metric ?? "");
    if (args.format === "png") {
      fs.writeFileSync(args.out, await toPng(result.svg));
    } else {
      fs.writeFileSync(args.out, result.svg, "utf-8");
    }
    console.log(`wrote ${args.out}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 1;
    }
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

const invokedDirectly =
  process.argv[1] && (process.argv[1].endsWith("cli.js") || process.argv[1].endsWith("hipe-report"));
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
