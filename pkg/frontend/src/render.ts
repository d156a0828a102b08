import { parseSweepCsv, parseTraceCsv, SweepRow, TraceRow } from './csv';
import { logLogSlope } from './fit';
import { DEFAULT_FRAME, linearScale, logScale, PALETTE, Scene } from './svg';

export type PanelKind = 'gap-vs-comm' | 'gap-vs-comp' | 'sweep';

export interface PlotInput {
  path: string;
  label?: string;
}

export interface PlotSpec {
  panel: PanelKind;
  inputs: PlotInput[];
  out: string;
  title?: string;
  logx?: boolean;
  logy?: boolean;
  /** sweep only: plot gradient cost instead of communication rounds */
  y?: 'comm_rounds' | 'grad_components';
}

export interface RenderResult {
  svg: string;
  /** sweep panels: fitted log-log slope per label, 6-decimal annotation value */
  slopes: Record<string, number>;
}

export function validateSpec(raw: unknown): PlotSpec {
  const spec = raw as Partial<PlotSpec>;
  if (!spec || typeof spec !== 'object') throw new Error('spec must be an object');
  if (spec.panel !== 'gap-vs-comm' && spec.panel !== 'gap-vs-comp' && spec.panel !== 'sweep') {
    throw new Error(`unknown panel kind: ${String(spec.panel)}`);
  }
  if (!Array.isArray(spec.inputs) || spec.inputs.length === 0) {
    throw new Error('spec needs at least one input CSV');
  }
  for (const input of spec.inputs) {
    if (!input || typeof input.path !== 'string') throw new Error('every input needs a path');
  }
  if (typeof spec.out !== 'string' || spec.out.length === 0) {
    throw new Error('spec needs an output path');
  }
  return spec as PlotSpec;
}

interface Series {
  label: string;
  xs: number[];
  ys: number[];
}

function gapSeries(rows: TraceRow[], xColumn: 'comm_rounds_cum' | 'grad_components_cum', label: string): Series {
  const xs: number[] = [];
  const ys: number[] = [];
  for (const row of rows) {
    if (row.gap !== null && row.gap > 0) {
      xs.push(row[xColumn]);
      ys.push(row.gap);
    }
  }
  if (xs.length === 0) throw new Error(`${label}: no positive gap values to plot`);
  return { label, xs, ys };
}

function bounds(series: Series[]): { xlo: number; xhi: number; ylo: number; yhi: number } {
  let xlo = Infinity; let xhi = -Infinity; let ylo = Infinity; let yhi = -Infinity;
  for (const s of series) {
    for (const x of s.xs) { xlo = Math.min(xlo, x); xhi = Math.max(xhi, x); }
    for (const y of s.ys) { ylo = Math.min(ylo, y); yhi = Math.max(yhi, y); }
  }
  return { xlo, xhi, ylo, yhi };
}

function renderGapPanel(spec: PlotSpec): RenderResult {
  const xColumn = spec.panel === 'gap-vs-comm' ? 'comm_rounds_cum' : 'grad_components_cum';
  const xLabel = spec.panel === 'gap-vs-comm' ? 'communication rounds' : 'gradient components';
  const series = spec.inputs.map((input, i) =>
    gapSeries(parseTraceCsv(input.path), xColumn, input.label ?? `series ${i + 1}`));
  const frame = DEFAULT_FRAME;
  const scene = new Scene(frame);
  const b = bounds(series);
  const logx = spec.logx ?? false;
  const logy = spec.logy ?? true;
  const xS = logx
    ? logScale(Math.max(b.xlo, 1e-12), b.xhi, frame.left, frame.width - frame.right)
    : linearScale(Math.min(b.xlo, 0), b.xhi, frame.left, frame.width - frame.right);
  const yS = logy
    ? logScale(b.ylo, b.yhi, frame.height - frame.bottom, frame.top)
    : linearScale(b.ylo, b.yhi, frame.height - frame.bottom, frame.top);
  scene.axes(xS, yS, xLabel, 'optimality gap');
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts: Array<[number, number]> = s.xs.map((x, j) => [xS.toPixel(x), yS.toPixel(s.ys[j])]);
    scene.polyline(pts, color);
    scene.text(frame.width - frame.right + 10, frame.top + 16 + 16 * i, s.label, { fill: color });
  });
  return { svg: scene.render(spec.title ?? xLabel), slopes: {} };
}

function renderSweepPanel(spec: PlotSpec): RenderResult {
  const yField = spec.y ?? 'comm_rounds';
  const rows: SweepRow[] = spec.inputs.flatMap((input) => parseSweepCsv(input.path));
  const byLabel = new Map<string, SweepRow[]>();
  for (const row of rows) {
    if (row[yField] === null) continue;
    const list = byLabel.get(row.label) ?? [];
    list.push(row);
    byLabel.set(row.label, list);
  }
  if (byLabel.size === 0) throw new Error('sweep CSV has no usable points');

  const series: Series[] = [];
  for (const [label, pts] of byLabel) {
    pts.sort((a, c) => a.x - c.x);
    series.push({ label, xs: pts.map((p) => p.x), ys: pts.map((p) => p[yField] as number) });
  }
  series.sort((a, c) => a.label.localeCompare(c.label));

  const frame = DEFAULT_FRAME;
  const scene = new Scene(frame);
  const b = bounds(series);
  const xS = logScale(b.xlo, b.xhi, frame.left, frame.width - frame.right);
  const yS = logScale(b.ylo, b.yhi, frame.height - frame.bottom, frame.top);
  scene.axes(xS, yS, 'swept parameter', yField === 'comm_rounds' ? 'communications to target' : 'gradient components to target');

  const slopes: Record<string, number> = {};
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    s.xs.forEach((x, j) => scene.circle(xS.toPixel(x), yS.toPixel(s.ys[j]), 3.5, color));
    const slope = logLogSlope(s.xs, s.ys);
    slopes[s.label] = slope;
    // fitted line through the centroid in log-log coordinates
    const cx = s.xs.reduce((a, v) => a + Math.log10(v), 0) / s.xs.length;
    const cy = s.ys.reduce((a, v) => a + Math.log10(v), 0) / s.ys.length;
    const xls = [Math.log10(b.xlo), Math.log10(b.xhi)];
    const pts: Array<[number, number]> = xls.map((lx) => [
      xS.toPixel(Math.pow(10, lx)),
      yS.toPixel(Math.pow(10, cy + slope * (lx - cx))),
    ]);
    scene.polyline(pts, color, 1);
    scene.text(frame.width - frame.right + 10, frame.top + 16 + 32 * i, s.label, { fill: color });
    scene.text(frame.width - frame.right + 10, frame.top + 30 + 32 * i,
      `slope ${slope.toFixed(6)}`, { fill: color, size: 11 });
  });
  return { svg: scene.render(spec.title ?? 'cost-to-target scaling'), slopes };
}

export function renderPanel(spec: PlotSpec): RenderResult {
  if (spec.panel === 'sweep') return renderSweepPanel(spec);
  return renderGapPanel(spec);
}
