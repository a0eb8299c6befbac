/**
 * Stub checker worker.
 *
 * Protocol-conformant stand-in for a real video-language model: it answers
 * "no" exactly when the expression contains the marker token `ABSENT`, and
 * "yes" otherwise. To plug in real inference (a QwenVL-style model), replace
 * `answerCheck` with code that feeds `request.frames` and `request.prompt`
 * to the model and returns its free-form answer text.
 */

import { Request, Response, runWorker } from './protocol';

export const NO_MARKER = 'ABSENT';

export function answerCheck(request: Request): Response {
  const expression = request.expression;
  if (typeof expression !== 'string') {
    throw new Error("check request needs an 'expression' string");
  }
  return { answer: expression.includes(NO_MARKER) ? 'no' : 'yes' };
}

export const CHECKER_SPEC = {
  hello: { name: 'stub-checker' },
  ops: { check: answerCheck },
};

if (require.main === module) {
  runWorker(CHECKER_SPEC);
}
