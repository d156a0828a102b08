import { describe, expect, it } from 'vitest';

import { logLogSlope, slope } from '../src/fit';

describe('least-squares slope', () => {
  it('recovers an exact line', () => {
    const xs = [0, 1, 2, 3, 4];
    const ys = xs.map((x) => 2.5 * x - 1);
    expect(slope(xs, ys)).toBeCloseTo(2.5, 12);
  });

  it('rejects degenerate input', () => {
    expect(() => slope([1, 1], [0, 1])).toThrow(/degenerate/);
    expect(() => slope([1], [0])).toThrow(/two matched points/);
  });
});

describe('log-log slope', () => {
  it('recovers an exact power law', () => {
    const xs = [1, 2, 4, 8];
    const ys = xs.map((x) => 3 * Math.pow(x, 0.5));
    expect(Math.abs(logLogSlope(xs, ys) - 0.5)).toBeLessThan(1e-12);
  });

  it('annotated slope within 0.01 of the generator exponent with noise', () => {
    // four points exactly on slope 0.5 plus a sub-1% wobble
    const xs = [1, 2, 4, 8];
    const wobble = [1.004, 0.997, 1.002, 0.999];
    const ys = xs.map((x, i) => Math.pow(x, 0.5) * wobble[i]);
    expect(Math.abs(logLogSlope(xs, ys) - 0.5)).toBeLessThan(0.01);
  });

  it('ignores non-positive points', () => {
    expect(logLogSlope([1, 2, 4, 0], [1, 2, 4, 5])).toBeCloseTo(1, 9);
  });
});
