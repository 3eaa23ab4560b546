import { execFileSync, spawn, ChildProcess } from 'node:child_process';
import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ClientSession, SessionStateError, TransportError } from '../src/client.js';
import {
  Observation,
  StepResponse,
  Task,
  WireMessage,
  exchangeSchema,
} from '../src/types.js';

const PORT = 20000 + Math.floor(Math.random() * 9000);
const BASE_URL = `http://127.0.0.1:${PORT}`;
const REPO_ROOT = join(__dirname, '..', '..');

const TASK: Task = {
  id: 'client-eq-1',
  prompt: 'What is 2+2?',
  reference_answer: '4',
  verifier: 'exact_match',
  difficulty: { pass_rate: 0.9, tier: 'easy' },
};
const SEED = 5;
const MODEL = 'sim-mid';

let server: ChildProcess;
let workDir: string;

async function waitForHealthy(timeoutMs = 15000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE_URL}/healthz`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  throw new Error('gateway did not become healthy');
}

/** The single-model routing script: call once, then adopt that response. */
function singleModelAction(observation: Observation): WireMessage {
  const tool = observation.transcript.find((m) => m.role === 'tool');
  if (!tool) {
    return {
      role: 'assistant',
      content: null,
      tool_calls: [
        {
          id: 'tc-0',
          type: 'function',
          function: {
            name: 'call_model',
            arguments: JSON.stringify({ model: MODEL, payload: observation.task_prompt }),
          },
        },
      ],
    };
  }
  return {
    role: 'assistant',
    content: null,
    tool_calls: [
      {
        id: 'tc-0',
        type: 'function',
        function: {
          name: 'select_response',
          arguments: JSON.stringify({ call_id: (tool as any).tool_call_id }),
        },
      },
    ],
  };
}

async function runEpisode(session: ClientSession): Promise<StepResponse> {
  let observation = await session.reset(TASK, SEED, { k: 1.0, lambda: 0.5 });
  let last: StepResponse;
  do {
    last = await session.step(singleModelAction(observation));
    if (!last.done) observation = last.observation;
  } while (!last.done);
  return last;
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), 'xrouter-client-'));
  server = spawn('python3', ['-m', 'xrouter.cli', 'serve', '--port', String(PORT)], {
    cwd: REPO_ROOT,
    stdio: 'ignore',
  });
  await waitForHealthy();
}, 30000);

afterAll(() => {
  server?.kill();
});

describe('ClientSession', () => {
  it('matches the CLI eval output for the same seed, field for field', async () => {
    const tasksPath = join(workDir, 'tasks.jsonl');
    writeFileSync(tasksPath, JSON.stringify(TASK) + '\n');
    const reportPath = join(workDir, 'report.json');
    execFileSync(
      'python3',
      [
        '-m', 'xrouter.cli', 'eval',
        '--tasks', tasksPath,
        '--policy', `single:${MODEL}`,
        '--seed', String(SEED),
        '--k', '1.0',
        '--lambda', '0.5',
        '--out', reportPath,
      ],
      { cwd: REPO_ROOT },
    );
    const report = JSON.parse(readFileSync(reportPath, 'utf-8'));
    const evalRow = report.rows[0];

    const session = new ClientSession({ baseUrl: BASE_URL });
    const last = await runEpisode(session);
    if (!last.done) throw new Error('episode did not finish');
    const final = last.final;

    const byModel: Record<string, number> = {};
    for (const record of final.records) {
      byModel[record.model_name] = (byModel[record.model_name] ?? 0) + 1;
    }
    const clientRow = {
      task_id: final.task_id,
      status: final.status,
      success: final.success,
      cost_nano_usd: final.cost_nano_usd,
      cost_usd: final.cost_usd,
      reward: final.reward,
      records: { count: final.records.length, by_model: byModel },
    };
    expect(clientRow).toEqual(evalRow);
    expect(last.reward).toBe(evalRow.reward);
  });

  it('writes a transcript of exactly reset + N step exchanges that validates', async () => {
    const session = new ClientSession({ baseUrl: BASE_URL });
    await runEpisode(session);
    expect(session.transcript).toHaveLength(3); // reset + call + select

    const path = join(workDir, 'transcript.jsonl');
    await session.saveTranscript(path);
    const lines = readFileSync(path, 'utf-8').trimEnd().split('\n');
    expect(lines).toHaveLength(3);
    for (const line of lines) {
      exchangeSchema.parse(JSON.parse(line)); // throws on any schema drift
    }
  });

  it('opens independent sessions on each reset', async () => {
    const a = new ClientSession({ baseUrl: BASE_URL });
    const b = new ClientSession({ baseUrl: BASE_URL });
    const obsA = await a.reset(TASK, SEED);
    const obsB = await b.reset(TASK, SEED);
    expect(a.episodeId).not.toBe(b.episodeId);
    expect(obsA).toEqual(obsB); // same seed, same observation
    expect(obsA.remaining_turns).toBe(3);
  });

  it('refuses to step a finished episode before any network call', async () => {
    const session = new ClientSession({ baseUrl: BASE_URL });
    await runEpisode(session);
    expect(session.done).toBe(true);
    await expect(session.step(singleModelAction(session.lastObservation!))).rejects.toThrow(
      SessionStateError,
    );
  });

  it('refuses to step before reset', async () => {
    const session = new ClientSession({ baseUrl: BASE_URL });
    await expect(
      session.step({ role: 'assistant', content: 'hello' }),
    ).rejects.toThrow(SessionStateError);
  });

  it('retries reset against an unreachable host, then fails with a transport error', async () => {
    const session = new ClientSession({
      baseUrl: 'http://127.0.0.1:9',
      resetRetries: 2,
      retryBaseMs: 10,
      timeoutMs: 500,
    });
    await expect(session.reset(TASK, 1)).rejects.toThrow(TransportError);
  }, 15000);

  it('passes gateway errors through typed', async () => {
    const session = new ClientSession({ baseUrl: BASE_URL });
    await expect(session.reset('no-such-task-id', 1)).rejects.toMatchObject({
      name: 'GatewayError',
      code: 'unknown-task',
    });
  });
});
