/**
 * Figure renderers. Each returns the SVG text plus the structured numbers it
 * was drawn from; the same numbers are embedded in the SVG metadata block.
 */

import {
  BandPoint,
  curveBands,
  meanAndSe,
  rankCurves,
} from "./aggregate.js";
import { LoadedInputs, SchemaError, TIMING_PHASES } from "./schema.js";
import * as svg from "./svg.js";

export type FigureKind = "curves" | "ranks" | "timing" | "lengthscales";

export interface RenderResult {
  svg: string;
  data: unknown;
}

const FOOTER = "band: mean +/- 1 standard error across seeds; single-seed bands have zero width";

export function renderCurves(inputs: LoadedInputs, metric: string): RenderResult {
  if (inputs.rows.length === 0) {
    throw new SchemaError("no metric rows found in inputs; nothing to plot");
  }
  const bands = curveBands(inputs.rows, metric);
  const algos = [...bands.keys()];
  const allPoints = algos.flatMap((a) => bands.get(a)!);
  const xs = allPoints.map((p) => p.batch);
  const los = allPoints.map((p) => p.lo);
  const his = allPoints.map((p) => p.hi);
  const x = svg.linearScale(Math.min(...xs), Math.max(...xs), svg.MARGIN.left, svg.WIDTH - svg.MARGIN.right, 4);
  const pad = 0.05 * (Math.max(...his) - Math.min(...los) || 1);
  const y = svg.linearScale(
    Math.min(...los) - pad,
    Math.max(...his) + pad,
    svg.HEIGHT - svg.MARGIN.bottom,
    svg.MARGIN.top
  );
  const parts: string[] = [svg.axes(x, y, "batch", metric)];
  algos.forEach((algo, i) => {
    const pts = bands.get(algo)!;
    const color = svg.PALETTE[i % svg.PALETTE.length];
    const upper = pts.map((p) => `${svg.fmt(x(p.batch))},${svg.fmt(y(p.hi))}`);
    const lower = [...pts].reverse().map((p) => `${svg.fmt(x(p.batch))},${svg.fmt(y(p.lo))}`);
    parts.push(
      `<polygon points="${upper.concat(lower).join(" ")}" fill="${color}" opacity="0.2"/>`
    );
    const line = pts.map((p) => `${svg.fmt(x(p.batch))},${svg.fmt(y(p.mean))}`).join(" ");
    parts.push(
      `<polyline points="${line}" fill="none" stroke="${color}" stroke-width="2"/>`
    );
    for (const p of pts) {
      parts.push(
        `<circle cx="${svg.fmt(x(p.batch))}" cy="${svg.fmt(y(p.mean))}" r="3" fill="${color}"/>`
      );
    }
  });
  parts.push(svg.legend(algos));
  const data = {
    kind: "curves",
    metric,
    series: Object.fromEntries(algos.map((a) => [a, bands.get(a)!])),
  };
  return {
    svg: svg.document(`${metric} vs batch`, parts.join("\n"), data, FOOTER),
    data,
  };
}

export function renderRanks(inputs: LoadedInputs, metric: string): RenderResult {
  if (inputs.rows.length === 0) {
    throw new SchemaError("no metric rows found in inputs; nothing to plot");
  }
  const table = rankCurves(inputs.rows, metric);
  if (table.algos.length === 0) {
    throw new SchemaError(`no complete ranking cells for metric '${metric}'`);
  }
  const batches = [...new Set(table.algos.flatMap((a) => [...table.ranks.get(a)!.keys()]))].sort(
    (a, b) => a - b
  );
  const x = svg.linearScale(
    Math.min(...batches),
    Math.max(...batches),
    svg.MARGIN.left,
    svg.WIDTH - svg.MARGIN.right,
    4
  );
  // rank 1 (best) at the top
  const y = svg.linearScale(
    table.algos.length + 0.25,
    0.75,
    svg.HEIGHT - svg.MARGIN.bottom,
    svg.MARGIN.top
  );
  const parts: string[] = [svg.axes(x, y, "batch", `mean rank (${metric})`)];
  table.algos.forEach((algo, i) => {
    const color = svg.PALETTE[i % svg.PALETTE.length];
    const pts = batches
      .filter((b) => table.ranks.get(algo)!.has(b))
      .map((b) => ({ b, r: table.ranks.get(algo)!.get(b)! }));
    const line = pts.map((p) => `${svg.fmt(x(p.b))},${svg.fmt(y(p.r))}`).join(" ");
    parts.push(`<polyline points="${line}" fill="none" stroke="${color}" stroke-width="2"/>`);
    for (const p of pts) {
      parts.push(
        `<circle cx="${svg.fmt(x(p.b))}" cy="${svg.fmt(y(p.r))}" r="3" fill="${color}"/>`
      );
    }
  });
  parts.push(svg.legend(table.algos));
  const data = {
    kind: "ranks",
    metric,
    excluded_cells: table.excludedCells,
    ranks: Object.fromEntries(
      table.algos.map((a) => [a, Object.fromEntries(table.ranks.get(a)!)])
    ),
  };
  return {
    svg: svg.document(`relative rankings (${metric})`, parts.join("\n"), data),
    data,
  };
}

export function renderTiming(inputs: LoadedInputs): RenderResult {
  const okRecords = inputs.records.filter((r) => r.status === "ok");
  if (okRecords.length === 0) {
    throw new SchemaError("no run records found in inputs; nothing to tabulate");
  }
  const algos = [...new Set(okRecords.map((r) => r.algo))].sort();
  const table: Record<string, Record<string, { mean: number; se: number }>> = {};
  for (const phase of TIMING_PHASES) {
    table[phase] = {};
    for (const algo of algos) {
      const values = okRecords
        .filter((r) => r.algo === algo)
        .map((r) => r.timings[phase] ?? 0);
      table[phase][algo] = meanAndSe(values);
    }
  }
  const rowH = 28;
  const x0 = svg.MARGIN.left;
  const colW = (svg.WIDTH - svg.MARGIN.right - x0) / (algos.length + 1);
  const parts: string[] = [];
  const header = ["runtime component (s)", ...algos];
  header.forEach((text, c) => {
    parts.push(
      `<text x="${svg.fmt(x0 + c * colW)}" y="${svg.MARGIN.top + 16}" font-size="12" ` +
        `font-weight="bold">${svg.escapeXml(text)}</text>`
    );
  });
  TIMING_PHASES.forEach((phase, r) => {
    const yRow = svg.MARGIN.top + 16 + rowH * (r + 1);
    parts.push(`<text x="${svg.fmt(x0)}" y="${yRow}" font-size="12">${phase}</text>`);
    algos.forEach((algo, c) => {
      const cell = table[phase][algo];
      parts.push(
        `<text x="${svg.fmt(x0 + (c + 1) * colW)}" y="${yRow}" font-size="12">` +
          `${cell.mean.toFixed(2)} &#177; ${cell.se.toFixed(2)}</text>`
      );
    });
  });
  const data = { kind: "timing", phases: table, n_records: okRecords.length };
  return { svg: svg.document("runtime by phase", parts.join("\n"), data), data };
}

export function renderLengthscales(inputs: LoadedInputs): RenderResult {
  const okRecords = inputs.records.filter((r) => r.status === "ok" && r.batches.length > 0);
  if (okRecords.length === 0) {
    throw new SchemaError("no run records with batches found; nothing to plot");
  }
  const algos = [...new Set(okRecords.map((r) => r.algo))].sort();
  // log-mean of the per-seed median lengthscales after the first batch
  const perAlgo: Record<string, number[]> = {};
  for (const algo of algos) {
    const logs: number[][] = [];
    for (const rec of okRecords.filter((r) => r.algo === algo)) {
      const medians = rec.batches[0].ensemble?.lengthscales?.["0.5"];
      if (!medians) {
        throw new SchemaError(`run_${rec.seed}.json: missing ensemble lengthscale medians`);
      }
      logs.push(medians.map((v) => Math.log10(v)));
    }
    const dims = logs[0].length;
    perAlgo[algo] = Array.from({ length: dims }, (_, d) =>
      logs.reduce((s, row) => s + row[d], 0) / logs.length
    );
  }
  const dims = perAlgo[algos[0]].length;
  const allVals = algos.flatMap((a) => perAlgo[a]);
  const x = svg.linearScale(-0.5, dims - 0.5, svg.MARGIN.left, svg.WIDTH - svg.MARGIN.right, Math.min(dims, 8));
  const lo = Math.min(0, ...allVals);
  const hi = Math.max(0, ...allVals);
  const y = svg.linearScale(lo - 0.1, hi + 0.1, svg.HEIGHT - svg.MARGIN.bottom, svg.MARGIN.top);
  const parts: string[] = [
    svg.axes(x, y, "input dimension", "log10 median lengthscale (after initialization)"),
  ];
  const group = 0.8;
  const barW = group / algos.length;
  algos.forEach((algo, i) => {
    const color = svg.PALETTE[i % svg.PALETTE.length];
    perAlgo[algo].forEach((value, d) => {
      const left = x(d - group / 2 + i * barW);
      const right = x(d - group / 2 + (i + 1) * barW);
      const yTop = Math.min(y(value), y(0));
      const height = Math.abs(y(value) - y(0));
      parts.push(
        `<rect x="${svg.fmt(left)}" y="${svg.fmt(yTop)}" width="${svg.fmt(right - left)}" ` +
          `height="${svg.fmt(height)}" fill="${color}"/>`
      );
    });
  });
  parts.push(svg.legend(algos));
  const data = { kind: "lengthscales", log10_median: perAlgo };
  return { svg: svg.document("inferred lengthscales", parts.join("\n"), data), data };
}

export function render(kind: FigureKind, inputs: LoadedInputs, metric: string): RenderResult {
  switch (kind) {
    case "curves":
      return renderCurves(inputs, metric);
    case "ranks":
      return renderRanks(inputs, metric);
    case "timing":
      return renderTiming(inputs);
    case "lengthscales":
      return renderLengthscales(inputs);
    default:
      throw new SchemaError(`unknown figure kind '${kind}'`);
  }
}
