/**
 * Integration against the real gateway: spawns the Python service and
 * drives the dashboard modules through actual HTTP, so every asserted
 * number is gateway-sourced.
 */

import { spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { GatewayClient, GatewayError, type MeterSpecPayload } from '../src/api.js';
import { controlStates } from '../src/console.js';
import { renderGauge } from '../src/meter.js';
import { comparePlans, renderComparisonTable } from '../src/whatif.js';

const PORT = 8799;
const BASE = `http://127.0.0.1:${PORT}`;
let server: ChildProcess;

const dev = new GatewayClient(BASE, 'dev-token');
const labeler = new GatewayClient(BASE, 'labeler-token');

function labelLines(prefix: string, size: number): string {
  return Array.from({ length: size }, (_, i) => JSON.stringify({ id: `${prefix}${i}`, label: 0 })).join(
    '\n',
  );
}

function predLines(prefix: string, size: number, errors = 0): string {
  return Array.from({ length: size }, (_, i) =>
    JSON.stringify({ id: `${prefix}${i}`, pred: i < errors ? 1 : 0 }),
  ).join('\n');
}

async function waitForGateway(): Promise<void> {
  for (let attempt = 0; attempt < 120; attempt += 1) {
    try {
      await fetch(`${BASE}/docs`);
      return;
    } catch {
      await new Promise((r) => setTimeout(r, 250));
    }
  }
  throw new Error('gateway did not come up on ' + BASE);
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), 'meter-dash-'));
  const config = join(dir, 'config.json');
  writeFileSync(
    config,
    JSON.stringify({ bind: `127.0.0.1:${PORT}`, storage: join(dir, 'store') }),
  );
  server = spawn('python3', ['-m', 'holdout_meter.gateway.cli', '--config', config, 'serve'], {
    stdio: 'ignore',
  });
  await waitForGateway();
}, 40_000);

afterAll(() => {
  server?.kill();
});

describe('what-if planner against the live gateway', () => {
  it(
    'shows the incremental-vs-regular comparison for the 8-step budget',
    async () => {
      const comparison = await comparePlans(dev, {
        mode: 'incremental',
        epsilons: [0.01, 0.01, 0.01, 0.01, 0.01],
        delta: 0.1,
        T: 8,
      });
      expect(comparison.chosen.plan.required_size).toBe(50776);
      expect(comparison.alternate.plan.required_size).toBe(80472);
      const html = renderComparisonTable(comparison);
      expect(html).toContain('50,776');
      expect(html).toContain('80,472');
    },
    30_000,
  );

  it(
    'tightening delta moves every size monotonically upward',
    async () => {
      const at = (delta: number) =>
        comparePlans(dev, { mode: 'incremental', epsilons: [0.01], delta, T: 8 });
      const loose = await at(0.1);
      const tight = await at(0.01);
      expect(tight.chosen.plan.required_size).toBeGreaterThanOrEqual(
        loose.chosen.plan.required_size,
      );
      expect(tight.alternate.plan.required_size).toBeGreaterThanOrEqual(
        loose.alternate.plan.required_size,
      );
    },
    30_000,
  );
});

describe('worked prediction upload', () => {
  it(
    'renders band 1 with the [0, 0.06] interval',
    async () => {
      const spec: MeterSpecPayload = {
        mode: 'regular',
        epsilons: [0.01, 0.02, 0.05, 0.1],
        bands: [
          [0, 0.05],
          [0.05, 0.1],
          [0.1, 0.2],
          [0.2, 1],
        ],
        delta: 0.2,
        T: 2,
      };
      const { plan } = await dev.plan(spec);
      const n = plan.required_size;

      await labeler.registerDataset(labelLines('x', n), true, 'worked-test');
      await dev.registerDataset(labelLines('w', 100), false, 'worked-val');
      await dev.createSession(spec, 'worked-val', 'worked-test', 'worked');

      // perfect on the test set, 3 errors on the 100-item validation set:
      // empirical gap 0.03 lands in the first band
      const preds = `${predLines('x', n)}\n${predLines('w', 100, 3)}`;
      const { report } = await dev.submit('worked', preds);
      expect(report.signal).toBe(1);
      expect(report.band).toEqual([0, 0.05]);
      expect(report.interval).toEqual([0, 0.06]);

      const view = await dev.meter('worked');
      const gauge = renderGauge(view.bands, view.report);
      expect(gauge).toContain('signal 1');
      expect(gauge).toContain('overfitting bound [0, 0.06]');
    },
    60_000,
  );
});

describe('control enablement equals gateway acceptance', () => {
  const spec: MeterSpecPayload = { mode: 'regular', epsilons: [0.2, 0.2, 0.2], delta: 0.2, T: 2 };
  let size = 0;

  async function outcome(run: () => Promise<unknown>): Promise<string> {
    try {
      await run();
      return 'accepted';
    } catch (err) {
      if (err instanceof GatewayError) return err.code;
      throw err;
    }
  }

  it(
    'holds on a fresh session and after exhaustion',
    async () => {
      const { plan } = await dev.plan(spec);
      size = plan.required_size;
      await labeler.registerDataset(labelLines('x', size), true, 'ctl-test');
      await dev.registerDataset(labelLines('w', 10), false, 'ctl-val');
      await dev.createSession(spec, 'ctl-val', 'ctl-test', 'ctl');
      const preds = `${predLines('x', size)}\n${predLines('w', 10)}`;

      // fresh: submit enabled; revert/handoff/rotate must be rejected
      let controls = controlStates(await dev.meter('ctl'));
      expect(controls.submit.enabled).toBe(true);
      expect(controls.revert.enabled).toBe(false);
      expect(controls.handoff.enabled).toBe(false);
      expect(controls.rotate.enabled).toBe(false);
      expect(await outcome(() => dev.revert('ctl'))).toBe('no_revert_budget');
      expect(await outcome(() => dev.handoff('ctl'))).toBe('no_remaining_tenant');
      expect(await outcome(() => dev.rotate('ctl', 'ctl-test2'))).toBe('session_not_exhausted');
      expect(await outcome(() => dev.submit('ctl', preds))).toBe('accepted');

      // exhaust the remaining step
      await dev.submit('ctl', preds);
      controls = controlStates(await dev.meter('ctl'));
      expect(controls.submit.enabled).toBe(false);
      expect(controls.rotate.enabled).toBe(true);
      expect(await outcome(() => dev.submit('ctl', preds))).toBe('session_exhausted');

      await labeler.registerDataset(labelLines('y', size), true, 'ctl-test2');
      expect(await outcome(() => dev.rotate('ctl', 'ctl-test2'))).toBe('accepted');
      controls = controlStates(await dev.meter('ctl'));
      expect(controls.submit.enabled).toBe(true);
      expect(controls.rotate.enabled).toBe(false);
    },
    60_000,
  );
});
