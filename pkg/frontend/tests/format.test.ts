import { describe, expect, it } from 'vitest';

import { escapeHtml, formatCount, formatRange, formatSize, trimFloat } from '../src/format.js';

describe('formatCount', () => {
  it('groups thousands', () => {
    expect(formatCount('12207030')).toBe('12,207,030');
    expect(formatCount('380050')).toBe('380,050');
    expect(formatCount('7')).toBe('7');
  });

  it('keeps counts beyond 2^53 lossless', () => {
    // 50-band, 100-step submission count: far past float precision
    const huge = '88817841970012523233890533447265625000000000000000001';
    expect(formatCount(huge).replace(/,/g, '')).toBe(huge);
  });

  it('rejects non-integers', () => {
    expect(() => formatCount('12.5')).toThrow();
    expect(() => formatCount('abc')).toThrow();
  });
});

describe('display helpers', () => {
  it('formats ranges and floats', () => {
    expect(formatRange([0, 0.06])).toBe('[0, 0.06]');
    expect(formatRange(null)).toBe('—');
    expect(trimFloat(0.1 + 0.2)).toBe('0.3');
  });

  it('formats sizes', () => {
    expect(formatSize(50776)).toBe('50,776');
  });

  it('escapes html', () => {
    expect(escapeHtml('<b>&"')).toBe('&lt;b&gt;&amp;&quot;');
  });
});
