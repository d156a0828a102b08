#!/usr/bin/env node
import { readFileSync, writeFileSync } from 'fs';

import { renderPanel, validateSpec } from './render';

export function main(argv: string[]): number {
  const [command, specPath] = argv;
  if (command !== 'plot' || !specPath) {
    console.error('usage: dcatalyst-plot plot <spec.json>');
    return 1;
  }
  try {
    const spec = validateSpec(JSON.parse(readFileSync(specPath, 'utf8')));
    const result = renderPanel(spec);  // render fully before touching the output
    writeFileSync(spec.out, result.svg);
    console.log(`wrote ${spec.out}`);
    for (const [label, slope] of Object.entries(result.slopes)) {
      console.log(`  ${label}: slope ${slope.toFixed(6)}`);
    }
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
