/** Minimal deterministic SVG scene builder (no DOM, plain strings). */

export interface Frame {
  width: number;
  height: number;
  left: number;
  right: number;
  top: number;
  bottom: number;
}

export const DEFAULT_FRAME: Frame = {
  width: 640, height: 420, left: 70, right: 160, top: 30, bottom: 50,
};

export interface Scale {
  toPixel(v: number): number;
  ticks(): number[];
  log: boolean;
}

const fmt = (v: number) => v.toFixed(2);

export function linearScale(lo: number, hi: number, pxLo: number, pxHi: number): Scale {
  if (hi === lo) { hi = lo + 1; }
  const span = hi - lo;
  // round tick step to 1/2/5 times a power of ten
  const raw = span / 5;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const norm = raw / mag;
  const step = (norm < 1.5 ? 1 : norm < 3.5 ? 2 : norm < 7.5 ? 5 : 10) * mag;
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-12 * span; t += step) {
    ticks.push(t);
  }
  return {
    log: false,
    toPixel: (v) => pxLo + ((v - lo) / span) * (pxHi - pxLo),
    ticks: () => ticks,
  };
}

export function logScale(lo: number, hi: number, pxLo: number, pxHi: number): Scale {
  if (lo <= 0) throw new Error('log scale needs positive bounds');
  const la = Math.log10(lo);
  const lb = Math.log10(hi <= lo ? lo * 10 : hi);
  const ticks: number[] = [];
  for (let e = Math.ceil(la); e <= Math.floor(lb + 1e-12); e++) {
    ticks.push(Math.pow(10, e));
  }
  if (ticks.length === 0) ticks.push(Math.pow(10, Math.round((la + lb) / 2)));
  return {
    log: true,
    toPixel: (v) => pxLo + ((Math.log10(v) - la) / (lb - la)) * (pxHi - pxLo),
    ticks: () => ticks,
  };
}

export function tickLabel(v: number, log: boolean): string {
  if (log) {
    const e = Math.round(Math.log10(v));
    return `1e${e}`;
  }
  if (Number.isInteger(v)) return String(v);
  return Number(v.toPrecision(3)).toString();
}

export const PALETTE = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd',
  '#ff7f0e', '#8c564b', '#17becf'];

export class Scene {
  private parts: string[] = [];

  constructor(readonly frame: Frame) {}

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1, dash = ''): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : '';
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="${stroke}" stroke-width="${width}"${d}/>`);
  }

  polyline(points: Array<[number, number]>, stroke: string, width = 1.5): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(' ');
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="${width}"/>`);
  }

  circle(x: number, y: number, r: number, fill: string): void {
    this.parts.push(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${r}" fill="${fill}"/>`);
  }

  text(x: number, y: number, content: string, opts: { size?: number; anchor?: string; fill?: string } = {}): void {
    const size = opts.size ?? 12;
    const anchor = opts.anchor ?? 'start';
    const fill = opts.fill ?? '#000';
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" text-anchor="${anchor}" fill="${fill}" font-family="sans-serif">${escapeXml(content)}</text>`);
  }

  axes(xScale: Scale, yScale: Scale, xLabel: string, yLabel: string): void {
    const f = this.frame;
    const x0 = f.left;
    const x1 = f.width - f.right;
    const y0 = f.height - f.bottom;
    const y1 = f.top;
    this.line(x0, y0, x1, y0, '#000');
    this.line(x0, y0, x0, y1, '#000');
    for (const t of xScale.ticks()) {
      const px = xScale.toPixel(t);
      if (px < x0 - 0.5 || px > x1 + 0.5) continue;
      this.line(px, y0, px, y0 + 4, '#000');
      this.text(px, y0 + 18, tickLabel(t, xScale.log), { anchor: 'middle', size: 10 });
    }
    for (const t of yScale.ticks()) {
      const py = yScale.toPixel(t);
      if (py > y0 + 0.5 || py < y1 - 0.5) continue;
      this.line(x0 - 4, py, x0, py, '#000');
      this.text(x0 - 7, py + 3, tickLabel(t, yScale.log), { anchor: 'end', size: 10 });
      this.line(x0, py, x1, py, '#eee');
    }
    this.text((x0 + x1) / 2, f.height - 12, xLabel, { anchor: 'middle' });
    this.parts.push(
      `<text x="16" y="${fmt((y0 + y1) / 2)}" font-size="12" text-anchor="middle" font-family="sans-serif" transform="rotate(-90 16 ${fmt((y0 + y1) / 2)})">${escapeXml(yLabel)}</text>`);
  }

  render(title: string): string {
    const f = this.frame;
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${f.width}" height="${f.height}" viewBox="0 0 ${f.width} ${f.height}">`,
      `<rect width="${f.width}" height="${f.height}" fill="#fff"/>`,
      `<text x="${fmt(f.width / 2)}" y="18" font-size="13" text-anchor="middle" font-family="sans-serif">${escapeXml(title)}</text>`,
      ...this.parts,
      '</svg>',
      '',
    ].join('\n');
  }
}

function escapeXml(s: string): string {
  return s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}
