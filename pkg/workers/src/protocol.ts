/**
 * Line-delimited JSON worker loop.
 *
 * One request object per stdin line, exactly one response object per line on
 * stdout, in request order. Requests are handled strictly sequentially; a
 * malformed line or a handler failure produces an `{"error": ...}` reply and
 * the loop keeps running.
 */

import * as readline from 'node:readline';

export type Request = Record<string, unknown>;
export type Response = Record<string, unknown>;

export type Handler = (request: Request) => Response;

export interface WorkerSpec {
  /** Handshake payload returned for `{"op": "hello"}`. */
  hello: Response;
  /** Handlers keyed by the request `op` field. */
  ops: Record<string, Handler>;
}

function handleLine(spec: WorkerSpec, line: string): Response {
  let request: unknown;
  try {
    request = JSON.parse(line);
  } catch {
    return { error: 'bad json' };
  }
  if (typeof request !== 'object' || request === null || Array.isArray(request)) {
    return { error: 'request must be a JSON object' };
  }
  const op = (request as Request).op;
  if (op === 'hello') {
    return spec.hello;
  }
  if (typeof op !== 'string' || !(op in spec.ops)) {
    return { error: `unknown op: ${String(op)}` };
  }
  try {
    return spec.ops[op](request as Request);
  } catch (err) {
    return { error: err instanceof Error ? err.message : String(err) };
  }
}

export function runWorker(spec: WorkerSpec): void {
  const rl = readline.createInterface({ input: process.stdin, terminal: false });
  rl.on('line', (line: string) => {
    if (line.trim() === '') {
      return;
    }
    const response = handleLine(spec, line);
    process.stdout.write(JSON.stringify(response) + '\n');
  });
}

export { handleLine };
