import { describe, expect, it } from 'vitest';

import { GatewayError, type MeterView, type SessionSummary, type SignalReport } from '../src/api.js';
import {
  actionFailure,
  controlStates,
  errorText,
  needsRender,
  renderConsole,
} from '../src/console.js';

function view(
  session: Partial<SessionSummary> = {},
  reportOverrides: Partial<SignalReport> = {},
): MeterView {
  const s: SessionSummary = {
    id: 's1',
    state: 'active',
    mode: 'regular',
    m: 4,
    T: 8,
    required_size: 50776,
    val_ref: 'val',
    test_ref: 'test',
    high_water: 0,
    remaining_submissions: 8,
    remaining_reverts: 0,
    tenant_cursor: 0,
    tenant_used: 0,
    tenancy: [8],
    submissions: 0,
    rotations: 0,
    seq: 1,
    ...session,
  };
  const report: SignalReport = {
    mode: s.mode,
    step: 0,
    signal: null,
    incremental_signal: 0,
    band: null,
    epsilon_bound: null,
    delta: 0.1,
    empirical_overfitting: null,
    remaining_submissions: s.remaining_submissions,
    remaining_reverts: s.remaining_reverts,
    interval: null,
    state: s.state,
    ...reportOverrides,
  };
  return {
    session: s,
    bands: [
      { lower: 0, upper: 0.05, epsilon: 0.01 },
      { lower: 0.05, upper: 0.1, epsilon: 0.02 },
      { lower: 0.1, upper: 0.2, epsilon: 0.05 },
      { lower: 0.2, upper: 1, epsilon: 0.1 },
    ],
    report,
    timeline: [],
    seq: s.seq,
  };
}

describe('control enablement mirrors gateway preconditions', () => {
  it('fresh single-tenant session without revert budget', () => {
    const c = controlStates(view());
    expect(c.submit.enabled).toBe(true);
    expect(c.revert.enabled).toBe(false);
    expect(c.revert.reason).toContain('revert budget exhausted');
    expect(c.handoff.enabled).toBe(false);
    expect(c.rotate.enabled).toBe(false);
  });

  it('revert needs both budget and history', () => {
    expect(controlStates(view({ remaining_reverts: 2, submissions: 0 })).revert.enabled).toBe(false);
    expect(controlStates(view({ remaining_reverts: 2, submissions: 1 })).revert.enabled).toBe(true);
  });

  it('exhausted session flips submit off and rotate on', () => {
    const c = controlStates(view({ state: 'exhausted', remaining_submissions: 0 }));
    expect(c.submit.enabled).toBe(false);
    expect(c.submit.reason).toContain('rotate');
    expect(c.rotate.enabled).toBe(true);
  });

  it('tenant quota gates submit and handoff', () => {
    const midQuota = view({ tenancy: [4, 4], tenant_used: 3, remaining_submissions: 5 });
    expect(controlStates(midQuota).submit.enabled).toBe(true);
    expect(controlStates(midQuota).handoff.enabled).toBe(false);
    expect(controlStates(midQuota).handoff.reason).toContain('1 of 4');

    const atQuota = view({ tenancy: [4, 4], tenant_used: 4, remaining_submissions: 4 });
    expect(controlStates(atQuota).submit.enabled).toBe(false);
    expect(controlStates(atQuota).submit.reason).toContain('hand off');
    expect(controlStates(atQuota).handoff.enabled).toBe(true);
  });

  it('closed sessions disable everything', () => {
    const c = controlStates(view({ state: 'closed' }));
    expect(c.submit.enabled).toBe(false);
    expect(c.revert.enabled).toBe(false);
    expect(c.handoff.enabled).toBe(false);
    expect(c.rotate.enabled).toBe(false);
  });
});

describe('rendering', () => {
  it('disabled controls carry tooltips naming the precondition', () => {
    const html = renderConsole(view());
    expect(html).toContain('id="revert-btn" disabled title="revert budget exhausted"');
    expect(html).toContain('id="submit-btn">');
  });

  it('exhausted sessions surface the rotation call to action with the label count', () => {
    const html = renderConsole(view({ state: 'exhausted', remaining_submissions: 0 }));
    expect(html).toContain('fresh sealed test set of at least 50,776 labels');
    expect(html).toContain('id="rotate-btn">');
  });

  it('incremental timelines never show raw signals or gaps', () => {
    const v = view({ mode: 'incremental' });
    v.timeline = [
      {
        step: 1,
        signal: null,
        incremental_signal: 2,
        empirical_overfitting: null,
        digest: 'd',
        timestamp: 't',
      },
    ];
    const html = renderConsole(v);
    expect(html).toContain('<td>1</td><td>·</td><td>2</td><td>·</td>');
  });
});

describe('refresh behavior', () => {
  it('rerenders only on a new sequence number', () => {
    expect(needsRender(null, 1)).toBe(true);
    expect(needsRender(3, 3)).toBe(false);
    expect(needsRender(3, 4)).toBe(true);
  });

  it('conflicts prompt a refresh, other failures show the error verbatim', () => {
    expect(actionFailure(new GatewayError('sequence_conflict', 'seq 3', 409))).toBe('refresh-prompt');
    const err = new GatewayError('no_revert_budget', 'no revert budget remaining', 409);
    expect(actionFailure(err)).toBe('show-error');
    expect(errorText(err)).toBe('no_revert_budget: no revert budget remaining');
  });
});
