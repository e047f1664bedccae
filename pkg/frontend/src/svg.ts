/** Minimal deterministic SVG assembly: plain string building, fixed palette,
 * no timestamps, so repeated renders are byte-identical. */

export const WIDTH = 720;
export const HEIGHT = 440;
export const MARGIN = { top: 36, right: 160, bottom: 48, left: 64 };

export const PALETTE = [
  "#1f77b4",
  "#ff7f0e",
  "#2ca02c",
  "#d62728",
  "#9467bd",
  "#8c564b",
  "#e377c2",
  "#7f7f7f",
];

export function fmt(x: number): string {
  return (Math.round(x * 100) / 100).toString();
}

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface Scale {
  (value: number): number;
  ticks: number[];
}

export function linearScale(
  lo: number,
  hi: number,
  rangeLo: number,
  rangeHi: number,
  tickCount = 5
): Scale {
  if (hi === lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const scale = ((value: number) =>
    rangeLo + ((value - lo) / (hi - lo)) * (rangeHi - rangeLo)) as Scale;
  const step = niceStep((hi - lo) / tickCount);
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let t = first; t <= hi + 1e-9; t += step) {
    ticks.push(Math.abs(t) < 1e-12 ? 0 : t);
  }
  scale.ticks = ticks;
  return scale;
}

function niceStep(raw: number): number {
  const mag = Math.pow(10, Math.floor(Math.log10(Math.abs(raw) || 1)));
  const norm = raw / mag;
  const step = norm >= 5 ? 10 : norm >= 2 ? 5 : norm >= 1 ? 2 : 1;
  return step * mag;
}

export function tickLabel(value: number): string {
  const abs = Math.abs(value);
  if (abs !== 0 && (abs >= 10000 || abs < 0.001)) return value.toExponential(1);
  return parseFloat(value.toPrecision(6)).toString();
}

export function axes(x: Scale, y: Scale, xLabel: string, yLabel: string): string {
  const parts: string[] = [];
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  parts.push(
    `<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="#333" stroke-width="1"/>`
  );
  parts.push(
    `<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="#333" stroke-width="1"/>`
  );
  for (const t of x.ticks) {
    const px = fmt(x(t));
    parts.push(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="#333"/>`);
    parts.push(
      `<text x="${px}" y="${y0 + 20}" text-anchor="middle" font-size="11">${tickLabel(t)}</text>`
    );
  }
  for (const t of y.ticks) {
    const py = fmt(y(t));
    parts.push(`<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="#333"/>`);
    parts.push(
      `<text x="${x0 - 8}" y="${py}" text-anchor="end" dominant-baseline="middle" ` +
        `font-size="11">${tickLabel(t)}</text>`
    );
  }
  parts.push(
    `<text x="${fmt((x0 + x1) / 2)}" y="${HEIGHT - 12}" text-anchor="middle" ` +
      `font-size="12">${escapeXml(xLabel)}</text>`
  );
  parts.push(
    `<text x="16" y="${fmt((y0 + y1) / 2)}" text-anchor="middle" font-size="12" ` +
      `transform="rotate(-90 16 ${fmt((y0 + y1) / 2)})">${escapeXml(yLabel)}</text>`
  );
  return parts.join("\n");
}

export function legend(names: string[]): string {
  const x = WIDTH - MARGIN.right + 16;
  return names
    .map((name, i) => {
      const y = MARGIN.top + 8 + 18 * i;
      const color = PALETTE[i % PALETTE.length];
      return (
        `<rect x="${x}" y="${y - 8}" width="12" height="12" fill="${color}"/>` +
        `<text x="${x + 18}" y="${y + 2}" font-size="12">${escapeXml(name)}</text>`
      );
    })
    .join("\n");
}

/** Wrap body content into a complete SVG document with embedded figure data
 * (JSON in a CDATA metadata block) so consumers can read back the exact
 * aggregation numbers the figure was drawn from. */
export function document(title: string, body: string, data: unknown, footer = ""): string {
  const json = JSON.stringify(data).replace(/\]\]>/g, "]]]]><![CDATA[>");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
    `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">\n` +
    `<metadata id="figure-data"><![CDATA[${json}]]></metadata>\n` +
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>\n` +
    `<text x="${WIDTH / 2}" y="20" text-anchor="middle" font-size="14" ` +
    `font-weight="bold">${escapeXml(title)}</text>\n` +
    body +
    (footer
      ? `\n<text x="${MARGIN.left}" y="${HEIGHT - 2}" font-size="9" fill="#666">` +
        `${escapeXml(footer)}</text>`
      : "") +
    `\n</svg>\n`
  );
}

export function extractFigureData(svgText: string): unknown {
  const match = svgText.match(/<metadata id="figure-data"><!\[CDATA\[([\s\S]*?)\]\]><\/metadata>/);
  if (!match) throw new Error("no figure data found in SVG");
  return JSON.parse(match[1].replace(/\]\]\]\]><!\[CDATA\[>/g, "]]>"));
}
