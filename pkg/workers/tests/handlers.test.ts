import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';
import { PNG } from 'pngjs';
import { afterAll, describe, expect, it } from 'vitest';

import { answerCheck, CHECKER_SPEC } from '../src/checker';
import { handleLine } from '../src/protocol';
import { decodeMask } from '../src/rle';
import {
  BRIGHTNESS_THRESHOLD,
  brightestRegionMask,
  SEGMENTER_SPEC,
  segmentKeyFrames,
} from '../src/segmenter';
import { loadGrayImage } from '../src/image';

const tmpDir = fs.mkdtempSync(path.join(os.tmpdir(), 'rvos-workers-'));

afterAll(() => {
  fs.rmSync(tmpDir, { recursive: true, force: true });
});

function writePng(name: string, width: number, height: number,
                  paint: (x: number, y: number) => number): string {
  const png = new PNG({ width, height });
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const value = paint(x, y);
      const o = (y * width + x) * 4;
      png.data[o] = value;
      png.data[o + 1] = value;
      png.data[o + 2] = value;
      png.data[o + 3] = 255;
    }
  }
  const file = path.join(tmpDir, name);
  fs.writeFileSync(file, PNG.sync.write(png));
  return file;
}

describe('answerCheck', () => {
  it('rejects expressions containing the marker token', () => {
    expect(answerCheck({ op: 'check', expression: 'the ABSENT dog' })).toEqual({ answer: 'no' });
  });

  it('accepts ordinary expressions', () => {
    expect(answerCheck({ op: 'check', expression: 'a running cat' })).toEqual({ answer: 'yes' });
  });

  it('requires an expression field', () => {
    expect(() => answerCheck({ op: 'check' })).toThrow();
  });
});

describe('brightestRegionMask', () => {
  it('returns an empty mask for an all-dark frame', () => {
    const file = writePng('dark.png', 12, 10, () => 10);
    const mask = brightestRegionMask(loadGrayImage(file), BRIGHTNESS_THRESHOLD);
    expect(mask.every((v) => v === 0)).toBe(true);
  });

  it('covers a bright square on a dark background', () => {
    const file = writePng('square.png', 16, 12, (x, y) =>
      x >= 4 && x < 9 && y >= 3 && y < 8 ? 255 : 0);
    const mask = brightestRegionMask(loadGrayImage(file), BRIGHTNESS_THRESHOLD);
    for (let y = 0; y < 12; y++) {
      for (let x = 0; x < 16; x++) {
        const expected = x >= 4 && x < 9 && y >= 3 && y < 8 ? 1 : 0;
        expect(mask[y * 16 + x]).toBe(expected);
      }
    }
  });

  it('keeps only the largest of several bright regions', () => {
    const file = writePng('two.png', 20, 8, (x, y) => {
      if (y >= 1 && y < 6 && x >= 1 && x < 8) return 230; // 35 px
      if (y >= 2 && y < 4 && x >= 14 && x < 17) return 230; // 6 px
      return 15;
    });
    const mask = brightestRegionMask(loadGrayImage(file), BRIGHTNESS_THRESHOLD);
    expect(mask[2 * 20 + 2]).toBe(1);
    expect(mask[2 * 20 + 15]).toBe(0);
  });
});

describe('segmentKeyFrames', () => {
  it('answers one RLE mask per requested key frame', () => {
    const file = writePng('frame.png', 16, 12, (x, y) =>
      x >= 4 && x < 9 && y >= 3 && y < 8 ? 240 : 5);
    const reply = segmentKeyFrames({
      op: 'segment',
      video_id: 'v',
      expression: 'the bright square',
      height: 12,
      width: 16,
      key_frames: [
        { index: 0, path: file },
        { index: 4, path: file },
      ],
      all_frames: [file, file],
    }) as { masks: { index: number; rle: number[] }[] };
    expect(reply.masks.map((m) => m.index)).toEqual([0, 4]);
    for (const entry of reply.masks) {
      const bits = decodeMask(entry.rle, 12 * 16);
      expect(bits[4 * 16 + 5]).toBe(1);
      expect(bits[0]).toBe(0);
    }
  });

  it('rejects frames whose size disagrees with the request', () => {
    const file = writePng('small.png', 8, 8, () => 200);
    expect(() =>
      segmentKeyFrames({
        op: 'segment',
        height: 12,
        width: 16,
        key_frames: [{ index: 0, path: file }],
      }),
    ).toThrow(/expected 12x16/);
  });
});

describe('protocol framing', () => {
  it('answers the handshake with the declared identity', () => {
    expect(handleLine(SEGMENTER_SPEC, '{"op":"hello"}')).toEqual({
      name: 'stub',
      coverage: 'key_frames_only',
    });
    expect(handleLine(CHECKER_SPEC, '{"op":"hello"}')).toEqual({ name: 'stub-checker' });
  });

  it('maps malformed lines and unknown ops to error replies', () => {
    expect(handleLine(CHECKER_SPEC, 'not json')).toEqual({ error: 'bad json' });
    expect(handleLine(CHECKER_SPEC, '[1,2]')).toHaveProperty('error');
    expect(handleLine(CHECKER_SPEC, '{"op":"mystery"}')).toEqual({ error: 'unknown op: mystery' });
  });

  it('replays a transcript byte-identically', () => {
    const requests = [
      '{"op":"hello"}',
      '{"op":"check","video_id":"v","expression":"the ABSENT one","prompt":"p","frames":["a"]}',
      '{"op":"check","video_id":"v","expression":"a cat","prompt":"p","frames":["a"]}',
      'garbage',
    ];
    const run = () => requests.map((line) => JSON.stringify(handleLine(CHECKER_SPEC, line))).join('\n');
    expect(run()).toBe(run());
  });
});
