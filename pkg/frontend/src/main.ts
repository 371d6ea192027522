/**
 * Browser bootstrap: wires the what-if planner form and the session
 * console to the gateway client, polling the session keyed on its
 * event-sequence number.
 */

import { GatewayClient, GatewayError } from './api.js';
import { actionFailure, errorText, needsRender, renderConsole } from './console.js';
import {
  comparePlans,
  renderComparisonTable,
  renderFieldErrors,
  validatePlanForm,
  type PlanFormValues,
} from './whatif.js';

const POLL_MS = 2000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function client(): GatewayClient {
  const base = (el<HTMLInputElement>('base-url').value || '').replace(/\/$/, '');
  const token = el<HTMLInputElement>('token').value;
  return new GatewayClient(base, token);
}

function readPlanForm(): PlanFormValues {
  const nums = (id: string): number[] =>
    el<HTMLInputElement>(id)
      .value.split(',')
      .map((s) => s.trim())
      .filter(Boolean)
      .map(Number);
  return {
    mode: el<HTMLSelectElement>('mode').value as PlanFormValues['mode'],
    epsilons: nums('epsilons'),
    delta: Number(el<HTMLInputElement>('delta').value),
    T: Number(el<HTMLInputElement>('steps').value),
    tenancy: nums('tenancy'),
    revertSteps: nums('revert-steps'),
    conservative: el<HTMLInputElement>('conservative').checked,
  };
}

async function onPlan(): Promise<void> {
  const out = el('plan-output');
  const form = readPlanForm();
  const errors = validatePlanForm(form);
  if (Object.keys(errors).length > 0) {
    out.innerHTML = renderFieldErrors(errors);
    return;
  }
  try {
    out.innerHTML = renderComparisonTable(await comparePlans(client(), form));
  } catch (err) {
    out.innerHTML = `<p class="error">${err instanceof GatewayError ? errorText(err) : String(err)}</p>`;
  }
}

let lastSeq: number | null = null;
let pollTimer: number | undefined;

async function refreshConsole(force = false): Promise<void> {
  const sessionId = el<HTMLInputElement>('session-id').value.trim();
  if (!sessionId) return;
  try {
    const view = await client().meter(sessionId);
    if (force || needsRender(lastSeq, view.seq)) {
      lastSeq = view.seq;
      el('console').innerHTML = renderConsole(view);
      wireActions(sessionId);
    }
    el('console-error').textContent = '';
  } catch (err) {
    el('console-error').textContent =
      err instanceof GatewayError ? errorText(err) : String(err);
  }
}

async function act(run: () => Promise<unknown>): Promise<void> {
  try {
    await run();
    await refreshConsole(true);
  } catch (err) {
    if (err instanceof GatewayError && actionFailure(err) === 'refresh-prompt') {
      el('console-error').textContent =
        'another change landed first; the view was refreshed — retry if still wanted';
      await refreshConsole(true);
    } else {
      el('console-error').textContent =
        err instanceof GatewayError ? errorText(err) : String(err);
    }
  }
}

function wireActions(sessionId: string): void {
  const seq = lastSeq ?? undefined;
  el<HTMLButtonElement>('submit-btn').onclick = () => {
    el<HTMLInputElement>('preds-file').click();
  };
  el<HTMLInputElement>('preds-file').onchange = async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    const body = await file.text();
    await act(() => client().submit(sessionId, body, { ifMatchSeq: seq }));
  };
  el<HTMLButtonElement>('revert-btn').onclick = () =>
    act(() => client().revert(sessionId, { ifMatchSeq: seq }));
  el<HTMLButtonElement>('handoff-btn').onclick = () =>
    act(() => client().handoff(sessionId, { ifMatchSeq: seq }));
  el<HTMLButtonElement>('rotate-btn').onclick = () => {
    const ref = window.prompt('id of the fresh sealed test dataset:');
    if (ref) act(() => client().rotate(sessionId, ref, { ifMatchSeq: seq }));
  };
}

function onOpenSession(): void {
  lastSeq = null;
  if (pollTimer !== undefined) window.clearInterval(pollTimer);
  void refreshConsole(true);
  pollTimer = window.setInterval(() => void refreshConsole(), POLL_MS);
}

export function boot(): void {
  el<HTMLButtonElement>('plan-btn').addEventListener('click', () => void onPlan());
  el<HTMLButtonElement>('open-session').addEventListener('click', onOpenSession);
}

if (typeof document !== 'undefined' && document.getElementById('plan-btn')) {
  boot();
}
