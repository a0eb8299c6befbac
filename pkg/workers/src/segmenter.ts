/**
 * Stub segmenter worker.
 *
 * Model-free stand-in for a real segmentation backend: each key frame is
 * thresholded at half intensity and the largest bright connected region
 * becomes the mask. The handshake declares `key_frames_only`, so the
 * orchestrator propagates the key-frame masks across the video.
 *
 * To plug in real inference (a Sa2VA/SAM2-style model), replace
 * `segmentKeyFrames`: a model that tracks objects itself should answer with
 * masks for every frame in `request.all_frames` and declare coverage
 * `full_sequence` in `HELLO` instead.
 */

import { GrayImage, loadGrayImage } from './image';
import { Request, Response, runWorker } from './protocol';
import { encodeMask } from './rle';

export const BRIGHTNESS_THRESHOLD = 128;

interface KeyFrameRef {
  index: number;
  path: string;
}

/** Largest 4-connected component of pixels at or above the threshold. */
export function brightestRegionMask(image: GrayImage, threshold: number): Uint8Array {
  const { width, height, gray } = image;
  const size = width * height;
  const labelled = new Int32Array(size).fill(-1);
  const stack = new Int32Array(size);
  let bestStart = -1;
  let bestCount = 0;
  let label = 0;
  for (let seed = 0; seed < size; seed++) {
    if (gray[seed] < threshold || labelled[seed] >= 0) {
      continue;
    }
    let top = 0;
    stack[top++] = seed;
    labelled[seed] = label;
    let count = 0;
    while (top > 0) {
      const p = stack[--top];
      count += 1;
      const y = (p / width) | 0;
      const x = p - y * width;
      if (x > 0 && gray[p - 1] >= threshold && labelled[p - 1] < 0) {
        labelled[p - 1] = label;
        stack[top++] = p - 1;
      }
      if (x + 1 < width && gray[p + 1] >= threshold && labelled[p + 1] < 0) {
        labelled[p + 1] = label;
        stack[top++] = p + 1;
      }
      if (y > 0 && gray[p - width] >= threshold && labelled[p - width] < 0) {
        labelled[p - width] = label;
        stack[top++] = p - width;
      }
      if (y + 1 < height && gray[p + width] >= threshold && labelled[p + width] < 0) {
        labelled[p + width] = label;
        stack[top++] = p + width;
      }
    }
    if (count > bestCount) {
      bestCount = count;
      bestStart = label;
    }
    label += 1;
  }
  const mask = new Uint8Array(size);
  if (bestStart >= 0) {
    for (let i = 0; i < size; i++) {
      mask[i] = labelled[i] === bestStart ? 1 : 0;
    }
  }
  return mask;
}

export function segmentKeyFrames(request: Request): Response {
  const height = request.height;
  const width = request.width;
  const keyFrames = request.key_frames;
  if (typeof height !== 'number' || typeof width !== 'number' || !Array.isArray(keyFrames)) {
    throw new Error("segment request needs 'height', 'width' and 'key_frames'");
  }
  const masks = [];
  for (const entry of keyFrames as KeyFrameRef[]) {
    if (typeof entry.index !== 'number' || typeof entry.path !== 'string') {
      throw new Error('key frame entries need an index and a path');
    }
    const image = loadGrayImage(entry.path);
    if (image.height !== height || image.width !== width) {
      throw new Error(
        `frame ${entry.index} is ${image.height}x${image.width}, expected ${height}x${width}`,
      );
    }
    const mask = brightestRegionMask(image, BRIGHTNESS_THRESHOLD);
    masks.push({ index: entry.index, rle: encodeMask(mask) });
  }
  return { masks };
}

export const SEGMENTER_SPEC = {
  hello: { name: 'stub', coverage: 'key_frames_only' },
  ops: { segment: segmentKeyFrames },
};

if (require.main === module) {
  runWorker(SEGMENTER_SPEC);
}
