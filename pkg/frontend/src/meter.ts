/**
 * Gauge rendering: a semicircular dial whose arcs are proportional to the
 * band geometry from the meter spec, with a gray extension of length
 * epsilon_signal on each side of the active band for the distributional
 * slack. Incremental sessions show only the high-water needle.
 */

import type { BandView, SignalReport } from './api.js';
import { formatRange, trimFloat } from './format.js';

const CX = 160;
const CY = 150;
const R = 120;

/** Green-to-red ramp over the band index. */
export function bandColor(index: number, total: number): string {
  const t = total <= 1 ? 0 : index / (total - 1);
  const hue = Math.round(120 * (1 - t));
  return `hsl(${hue}, 70%, 45%)`;
}

function polar(angleDeg: number, radius: number): [number, number] {
  const rad = (Math.PI * angleDeg) / 180;
  return [CX - radius * Math.cos(rad), CY - radius * Math.sin(rad)];
}

/** SVG path for the dial segment covering [from, to] of the unit range. */
export function arcPath(from: number, to: number, radius: number = R): string {
  const [x0, y0] = polar(180 * from, radius);
  const [x1, y1] = polar(180 * to, radius);
  const large = to - from > 0.5 ? 1 : 0;
  return `M ${x0.toFixed(2)} ${y0.toFixed(2)} A ${radius} ${radius} 0 ${large} 1 ${x1.toFixed(2)} ${y1.toFixed(2)}`;
}

export interface GaugeModel {
  arcs: { path: string; color: string; title: string }[];
  grayArcs: { path: string }[];
  needleAngle: number | null; // degrees from the left end, 0..180
  label: string;
  interval: string;
}

/** The signal the gauge points at: raw band, or the high-water mark. */
export function displayedSignal(report: SignalReport): number | null {
  if (report.mode === 'incremental') {
    return report.incremental_signal > 0 ? report.incremental_signal : null;
  }
  return report.signal;
}

export function gaugeModel(bands: BandView[], report: SignalReport): GaugeModel {
  const arcs = bands.map((b, i) => ({
    path: arcPath(b.lower, b.upper),
    color: bandColor(i, bands.length),
    title: `band ${i + 1}: [${trimFloat(b.lower)}, ${trimFloat(b.upper)}) ±${trimFloat(b.epsilon)}`,
  }));
  const signal = displayedSignal(report);
  const grayArcs: { path: string }[] = [];
  let needleAngle: number | null = null;
  if (signal !== null) {
    const band = bands[signal - 1];
    const lo = Math.max(0, band.lower - band.epsilon);
    const hi = Math.min(1, band.upper + band.epsilon);
    if (lo < band.lower) grayArcs.push({ path: arcPath(lo, band.lower, R + 14) });
    if (hi > band.upper) grayArcs.push({ path: arcPath(band.upper, hi, R + 14) });
    needleAngle = 180 * ((band.lower + band.upper) / 2);
  }
  const label =
    signal === null
      ? 'no submissions yet'
      : report.mode === 'incremental'
        ? `high-water signal ${signal}`
        : `signal ${signal}`;
  return { arcs, grayArcs, needleAngle, label, interval: formatRange(report.interval) };
}

export function renderGauge(bands: BandView[], report: SignalReport): string {
  const model = gaugeModel(bands, report);
  const arcSvg = model.arcs
    .map(
      (a) =>
        `<path d="${a.path}" stroke="${a.color}" stroke-width="22" fill="none"><title>${a.title}</title></path>`,
    )
    .join('');
  const graySvg = model.grayArcs
    .map((a) => `<path d="${a.path}" stroke="#9aa0a6" stroke-width="8" fill="none"></path>`)
    .join('');
  let needle = '';
  if (model.needleAngle !== null) {
    const [nx, ny] = polar(model.needleAngle, R - 24);
    needle = `<line x1="${CX}" y1="${CY}" x2="${nx.toFixed(2)}" y2="${ny.toFixed(2)}" stroke="#202124" stroke-width="3"/><circle cx="${CX}" cy="${CY}" r="5" fill="#202124"/>`;
  }
  return [
    `<svg viewBox="0 0 320 170" class="gauge" role="img" aria-label="${model.label}">`,
    graySvg,
    arcSvg,
    needle,
    `</svg>`,
    `<div class="gauge-label">${model.label}</div>`,
    `<div class="gauge-interval">overfitting bound ${model.interval}</div>`,
  ].join('');
}
