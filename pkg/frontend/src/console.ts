/**
 * Session console: renders the meter view and decides which controls are
 * live. Every enablement predicate mirrors a gateway precondition, so a
 * control is disabled exactly when the corresponding call would be
 * rejected — and the tooltip names the reason the gateway would give.
 */

import type { GatewayError, MeterView, TimelineEntry } from './api.js';
import { isStaleView } from './api.js';
import { escapeHtml, formatSize, trimFloat } from './format.js';
import { renderGauge } from './meter.js';

export interface ControlState {
  enabled: boolean;
  reason: string | null;
}

export interface ConsoleControls {
  submit: ControlState;
  revert: ControlState;
  handoff: ControlState;
  rotate: ControlState;
}

const ok: ControlState = { enabled: true, reason: null };
const no = (reason: string): ControlState => ({ enabled: false, reason });

export function controlStates(view: MeterView): ConsoleControls {
  const s = view.session;
  const closed = s.state === 'closed';
  const exhausted = s.state === 'exhausted';
  const quota = s.tenancy[s.tenant_cursor];
  const quotaUsed = s.tenant_used >= quota;
  const tenantsRemain = s.tenant_cursor + 1 < s.tenancy.length;

  let submit: ControlState = ok;
  if (closed) submit = no('session is closed');
  else if (exhausted) submit = no('submission budget exhausted; rotate the test set');
  else if (quotaUsed && tenantsRemain) submit = no('tenant budget used; hand off first');

  let revert: ControlState = ok;
  if (closed) revert = no('session is closed');
  else if (s.remaining_reverts < 1) revert = no('revert budget exhausted');
  else if (s.submissions < 1) revert = no('nothing to revert');

  let handoff: ControlState = ok;
  if (closed) handoff = no('session is closed');
  else if (!tenantsRemain) handoff = no('no further tenant');
  else if (!quotaUsed) handoff = no(`tenant has ${quota - s.tenant_used} of ${quota} steps left`);

  let rotate: ControlState = ok;
  if (closed) rotate = no('session is closed');
  else if (!exhausted) rotate = no('rotation applies to exhausted sessions only');

  return { submit, revert, handoff, rotate };
}

/** How to react to a failed action: stale views prompt a refresh. */
export function actionFailure(err: GatewayError): 'refresh-prompt' | 'show-error' {
  return isStaleView(err) ? 'refresh-prompt' : 'show-error';
}

/** Verbatim gateway code plus readable text, per the error contract. */
export function errorText(err: GatewayError): string {
  return `${err.code}: ${err.message}`;
}

function button(id: string, label: string, state: ControlState): string {
  const disabled = state.enabled ? '' : ' disabled';
  const title = state.reason ? ` title="${escapeHtml(state.reason)}"` : '';
  return `<button id="${id}"${disabled}${title}>${label}</button>`;
}

function timelineRow(entry: TimelineEntry): string {
  const raw = entry.signal === null ? '·' : String(entry.signal);
  const gap = entry.empirical_overfitting === null ? '·' : trimFloat(entry.empirical_overfitting);
  return `<tr><td>${entry.step}</td><td>${raw}</td><td>${entry.incremental_signal}</td><td>${gap}</td></tr>`;
}

export function renderConsole(view: MeterView): string {
  const s = view.session;
  const controls = controlStates(view);
  const rotateCta = controls.rotate.enabled
    ? `<p class="cta">Budget exhausted — provide a fresh sealed test set of at least ${formatSize(s.required_size)} labels to continue.</p>`
    : '';
  return [
    `<section class="meter" data-seq="${view.seq}">`,
    renderGauge(view.bands, view.report),
    `<dl class="budgets">`,
    `<dt>submissions left</dt><dd>${s.remaining_submissions} of ${s.T}</dd>`,
    `<dt>reverts left</dt><dd>${s.remaining_reverts}</dd>`,
    `<dt>tenant</dt><dd>${s.tenant_cursor + 1} of ${s.tenancy.length}</dd>`,
    `<dt>test set</dt><dd>${escapeHtml(s.test_ref)} (${formatSize(s.required_size)} labels required)</dd>`,
    `</dl>`,
    rotateCta,
    `<div class="actions">`,
    button('submit-btn', 'Submit predictions', controls.submit),
    button('revert-btn', 'Revert last', controls.revert),
    button('handoff-btn', 'Hand off', controls.handoff),
    button('rotate-btn', 'Rotate test set', controls.rotate),
    `</div>`,
    `<table class="timeline"><thead><tr><th>step</th><th>signal</th><th>high water</th><th>gap</th></tr></thead>`,
    `<tbody>${view.timeline.map(timelineRow).join('')}</tbody></table>`,
    `</section>`,
  ].join('\n');
}

/** Polling refresh is keyed on the event-sequence number. */
export function needsRender(lastSeq: number | null, incomingSeq: number): boolean {
  return lastSeq === null || incomingSeq !== lastSeq;
}
