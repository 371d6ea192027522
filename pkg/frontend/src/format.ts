/**
 * Display formatting. Submission counts arrive as decimal strings because
 * they can exceed 2^53; they are grouped without ever passing through a
 * float.
 */

/** Group a decimal-string integer with thousands separators, losslessly. */
export function formatCount(decimal: string): string {
  if (!/^-?\d+$/.test(decimal)) throw new Error(`not a decimal integer: ${decimal}`);
  const negative = decimal.startsWith('-');
  const digits = negative ? decimal.slice(1) : decimal;
  const grouped = digits.replace(/\B(?=(\d{3})+(?!\d))/g, ',');
  return negative ? `-${grouped}` : grouped;
}

/** Label counts from the gateway are plain JSON integers. */
export function formatSize(n: number): string {
  return formatCount(String(n));
}

export function formatRange(range: [number, number] | null): string {
  if (!range) return '—';
  return `[${trimFloat(range[0])}, ${trimFloat(range[1])}]`;
}

export function trimFloat(x: number): string {
  return Number.isInteger(x) ? String(x) : String(Math.round(x * 1e6) / 1e6);
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}
