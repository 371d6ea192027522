/**
 * What-if planner: validate a budget form client-side (mirroring the
 * gateway's spec rules, so bad requests fail before a round trip), then
 * fetch plans for the chosen spec, the alternate mode, and the baselines,
 * and lay them out side by side. All numbers come from gateway responses.
 */

import type { GatewayClient, MeterSpecPayload, Mode, PlanReport } from './api.js';
import { escapeHtml, formatCount, formatSize } from './format.js';

export interface PlanFormValues {
  mode: Mode;
  epsilons: number[];
  delta: number;
  T: number;
  bands?: [number, number][];
  tenancy?: number[];
  revertSteps?: number[];
  conservative?: boolean;
}

export type FieldErrors = Partial<
  Record<'mode' | 'epsilons' | 'delta' | 'T' | 'bands' | 'tenancy' | 'revertSteps', string>
>;

/** Client-side mirror of the meter-spec invariants. */
export function validatePlanForm(v: PlanFormValues): FieldErrors {
  const errors: FieldErrors = {};
  if (v.mode !== 'regular' && v.mode !== 'incremental') {
    errors.mode = 'mode must be regular or incremental';
  }
  if (!v.epsilons.length) {
    errors.epsilons = 'at least one tolerance is required';
  } else if (v.epsilons.some((e) => !(e > 0 && e <= 1))) {
    errors.epsilons = 'tolerances must lie in (0, 1]';
  } else {
    for (let i = 1; i < v.epsilons.length; i += 1) {
      if (v.epsilons[i] < v.epsilons[i - 1]) {
        errors.epsilons = 'tolerances must be nondecreasing';
        break;
      }
    }
  }
  if (!(v.delta > 0 && v.delta < 1)) errors.delta = 'delta must lie in (0, 1)';
  if (!Number.isInteger(v.T) || v.T < 1) errors.T = 'T must be a positive integer';

  if (v.bands && !errors.epsilons) {
    const m = v.epsilons.length;
    if (v.bands.length !== m) {
      errors.bands = `expected ${m} bands to match the tolerances`;
    } else if (v.bands[0][0] !== 0 || v.bands[m - 1][1] !== 1) {
      errors.bands = 'bands must start at 0 and end at 1';
    } else {
      for (let i = 0; i < m; i += 1) {
        const [lo, hi] = v.bands[i];
        if (!(lo < hi)) {
          errors.bands = `band ${i + 1} is empty`;
          break;
        }
        if (i > 0 && v.bands[i - 1][1] !== lo) {
          errors.bands = `bands must be contiguous at ${lo}`;
          break;
        }
      }
    }
  }

  if (v.tenancy && v.tenancy.length > 0) {
    if (v.tenancy.some((t) => !Number.isInteger(t) || t < 1)) {
      errors.tenancy = 'tenant step counts must be positive integers';
    } else if (!errors.T && v.tenancy.reduce((a, b) => a + b, 0) !== v.T) {
      errors.tenancy = `tenant steps must sum to T=${v.T}`;
    }
  }

  const reverts = v.revertSteps ?? [];
  if (reverts.length > 0) {
    if (!errors.T && reverts.length >= v.T) {
      errors.revertSteps = 'revert budget must be smaller than T';
    } else if (reverts.some((t) => !Number.isInteger(t) || t < 1 || t > v.T)) {
      errors.revertSteps = 'revert steps must lie in [1, T]';
    } else {
      for (let i = 0; i < reverts.length; i += 1) {
        if (i > 0 && reverts[i] < reverts[i - 1]) {
          errors.revertSteps = 'revert steps must be nondecreasing';
          break;
        }
        if (reverts[i] - i < 1) {
          errors.revertSteps = `revert step ${reverts[i]} shifts below step 1`;
          break;
        }
      }
    }
    if (v.tenancy && v.tenancy.length > 1) {
      errors.revertSteps = 'reverts cannot be combined with multiple tenants';
    }
  }
  return errors;
}

export function toSpecPayload(v: PlanFormValues, mode?: Mode): MeterSpecPayload {
  const payload: MeterSpecPayload = {
    mode: mode ?? v.mode,
    epsilons: v.epsilons,
    delta: v.delta,
    T: v.T,
  };
  if (v.bands) payload.bands = v.bands;
  if (v.tenancy && v.tenancy.length > 0) payload.tenancy = v.tenancy;
  if (v.revertSteps && v.revertSteps.length > 0) {
    payload.revert_budget = v.revertSteps.length;
    payload.revert_steps = v.revertSteps;
  }
  if (v.conservative) payload.conservative_multitenant = true;
  return payload;
}

export interface PlanComparison {
  chosen: { mode: Mode; plan: PlanReport };
  alternate: { mode: Mode; plan: PlanReport };
}

/** Fetch the chosen spec's plan plus the other mode for the same budget. */
export async function comparePlans(
  client: GatewayClient,
  form: PlanFormValues,
): Promise<PlanComparison> {
  const otherMode: Mode = form.mode === 'regular' ? 'incremental' : 'regular';
  const [chosen, alternate] = await Promise.all([
    client.plan(toSpecPayload(form)),
    client.plan(toSpecPayload(form, otherMode)),
  ]);
  return {
    chosen: { mode: form.mode, plan: chosen.plan },
    alternate: { mode: otherMode, plan: alternate.plan },
  };
}

function row(label: string, size: number, note: string): string {
  return `<tr><td>${escapeHtml(label)}</td><td class="num">${formatSize(size)}</td><td>${escapeHtml(note)}</td></tr>`;
}

export function renderComparisonTable(c: PlanComparison): string {
  const base = c.chosen.plan.baselines;
  const rows = [
    row(`${c.chosen.mode} meter (chosen)`, c.chosen.plan.required_size,
        `${formatCount(c.chosen.plan.counts.total)} possible submissions`),
    row(`${c.alternate.mode} meter`, c.alternate.plan.required_size,
        `${formatCount(c.alternate.plan.counts.total)} possible submissions`),
    row('fresh test set per step', base.resampling, 'resampling baseline'),
    row('non-adaptive submissions', base.independent, 'independence baseline'),
    row('single use', base.single_use, 'one submission only'),
  ];
  return [
    `<table class="plan-compare">`,
    `<thead><tr><th>approach</th><th>labels required</th><th></th></tr></thead>`,
    `<tbody>${rows.join('')}</tbody>`,
    `</table>`,
  ].join('');
}

export function renderFieldErrors(errors: FieldErrors): string {
  return Object.entries(errors)
    .map(([field, msg]) => `<p class="field-error" data-field="${field}">${escapeHtml(msg ?? '')}</p>`)
    .join('');
}
