import { readFileSync } from 'fs';

/** One row of an optimizer trace CSV (the harness's fixed column set). */
export interface TraceRow {
  outer_k: number;
  inner_t: number;
  comm_rounds_cum: number;
  grad_components_cum: number;
  prox_cum: number;
  gap: number | null;
  consensus_err: number | null;
  merit: number | null;
  wallclock_ms: number;
}

export const TRACE_COLUMNS = [
  'outer_k', 'inner_t', 'comm_rounds_cum', 'grad_components_cum',
  'prox_cum', 'gap', 'consensus_err', 'merit', 'wallclock_ms',
] as const;

/** One point of a sweep CSV: cost-to-target against a swept parameter. */
export interface SweepRow {
  label: string;
  x: number;
  comm_rounds: number | null;
  grad_components: number | null;
}

function splitCsv(text: string): string[][] {
  return text
    .split('\n')
    .map((line) => line.trim())
    .filter((line) => line.length > 0)
    .map((line) => line.split(','));
}

function numOrNull(tok: string): number | null {
  if (tok === '' || tok === undefined) return null;
  const v = Number(tok);
  if (Number.isNaN(v)) throw new Error(`not a number: ${tok}`);
  return v;
}

function requireColumns(header: string[], needed: readonly string[], path: string): Map<string, number> {
  const index = new Map<string, number>();
  header.forEach((name, i) => index.set(name, i));
  for (const col of needed) {
    if (!index.has(col)) {
      throw new Error(`${path}: missing column '${col}'`);
    }
  }
  return index;
}

export function parseTraceCsv(path: string): TraceRow[] {
  const lines = splitCsv(readFileSync(path, 'utf8'));
  if (lines.length === 0) throw new Error(`${path}: empty CSV`);
  const index = requireColumns(lines[0], TRACE_COLUMNS, path);
  if (lines.length === 1) throw new Error(`${path}: no data rows`);
  const get = (row: string[], col: string) => row[index.get(col)!];
  return lines.slice(1).map((row) => ({
    outer_k: Number(get(row, 'outer_k')),
    inner_t: Number(get(row, 'inner_t')),
    comm_rounds_cum: Number(get(row, 'comm_rounds_cum')),
    grad_components_cum: Number(get(row, 'grad_components_cum')),
    prox_cum: Number(get(row, 'prox_cum')),
    gap: numOrNull(get(row, 'gap')),
    consensus_err: numOrNull(get(row, 'consensus_err')),
    merit: numOrNull(get(row, 'merit')),
    wallclock_ms: Number(get(row, 'wallclock_ms')),
  }));
}

export function parseSweepCsv(path: string): SweepRow[] {
  const lines = splitCsv(readFileSync(path, 'utf8'));
  if (lines.length === 0) throw new Error(`${path}: empty CSV`);
  const index = requireColumns(lines[0], ['label', 'x', 'comm_rounds'], path);
  if (lines.length === 1) throw new Error(`${path}: no data rows`);
  const get = (row: string[], col: string) =>
    index.has(col) ? row[index.get(col)!] : '';
  return lines.slice(1).map((row) => ({
    label: get(row, 'label'),
    x: Number(get(row, 'x')),
    comm_rounds: numOrNull(get(row, 'comm_rounds')),
    grad_components: numOrNull(get(row, 'grad_components')),
  }));
}
