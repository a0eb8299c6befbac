/**
 * Minimal frame decoding: PNG via pngjs, JPEG via jpeg-js, picked by magic
 * bytes. Frames come back as 8-bit luminance grids.
 */

import * as fs from 'node:fs';
import { PNG } from 'pngjs';
import * as jpeg from 'jpeg-js';

export interface GrayImage {
  width: number;
  height: number;
  /** Row-major luminance, one byte per pixel. */
  gray: Uint8Array;
}

const PNG_MAGIC = Buffer.from([0x89, 0x50, 0x4e, 0x47]);
const JPEG_MAGIC = Buffer.from([0xff, 0xd8]);

function rgbaToGray(data: Uint8Array, width: number, height: number): Uint8Array {
  const gray = new Uint8Array(width * height);
  for (let i = 0; i < gray.length; i++) {
    const o = i * 4;
    // Rec.601 integer luma.
    gray[i] = (299 * data[o] + 587 * data[o + 1] + 114 * data[o + 2] + 500) / 1000 | 0;
  }
  return gray;
}

export function loadGrayImage(path: string): GrayImage {
  const data = fs.readFileSync(path);
  if (data.subarray(0, 4).equals(PNG_MAGIC)) {
    const png = PNG.sync.read(data);
    return {
      width: png.width,
      height: png.height,
      gray: rgbaToGray(png.data, png.width, png.height),
    };
  }
  if (data.subarray(0, 2).equals(JPEG_MAGIC)) {
    const decoded = jpeg.decode(data, { useTArray: true, formatAsRGBA: true });
    return {
      width: decoded.width,
      height: decoded.height,
      gray: rgbaToGray(decoded.data, decoded.width, decoded.height),
    };
  }
  throw new Error(`unsupported image format: ${path}`);
}
