/**
 * Spawns a real annotation service for the integration tests.
 *
 * Needs the Python package installed (al-exp / al-serve on PATH). A synthetic
 * corpus is generated, then all but the first few labels are blanked so the
 * service has a seed set plus a large unlabeled pool.
 */

import { execFileSync, spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

export const SERVICE_URL = 'http://127.0.0.1:8991';

let server: ChildProcess | undefined;

async function waitForReady(url: string, attempts = 100): Promise<void> {
  for (let i = 0; i < attempts; i++) {
    try {
      const res = await fetch(url);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error(`service at ${url} never became ready`);
}

export async function setup(): Promise<void> {
  const dir = mkdtempSync(join(tmpdir(), 'altext-ui-'));
  const corpus = join(dir, 'corpus.csv');
  execFileSync('al-exp', [
    'synth', '--docs', '80', '--classes', '2', '--seed', '3', '--out', corpus,
  ]);
  // keep 6 seed labels, blank the rest (synthetic rows contain no commas)
  const lines = readFileSync(corpus, 'utf-8').trim().split('\n');
  const stripped = lines.map((line, i) => {
    if (i === 0 || i <= 6) return line;
    return line.replace(/,[^,]*$/, ',');
  });
  writeFileSync(corpus, stripped.join('\n') + '\n');

  server = spawn(
    'al-serve',
    [
      '--dataset', corpus,
      '--strategy', 'breaking_ties',
      '--classifier', 'sparse_linear',
      '--batch-size', '4',
      '--port', '8991',
      '--session-dir', join(dir, 'session'),
      '--seed', '2',
      '--classes', 'class0,class1',
      '--stopping', 'kappa_average',
    ],
    { stdio: ['ignore', 'inherit', 'inherit'] },
  );
  server.on('exit', (code) => {
    if (code !== null && code !== 0) {
      console.error(`al-serve exited with code ${code}`);
    }
  });
  await waitForReady(SERVICE_URL + '/');
}

export async function teardown(): Promise<void> {
  server?.kill('SIGKILL');
}
