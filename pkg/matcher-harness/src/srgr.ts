/**
 * Binary grid format shared with the core pipeline.
 *
 * 64-byte little-endian header: magic "SRGR", u32 version, u64 rows, u64
 * cols, u64 channels, u32 element type (0 = float32), u32 flags (bit 0:
 * explicit nodata), f32 nodata, 20 bytes of padding; then a row-major
 * float32 payload with channels interleaved per pixel.
 */

import { readFileSync, writeFileSync } from "node:fs";

const MAGIC = 0x52475253; // "SRGR" read as LE u32
const HEADER_SIZE = 64;
const VERSION = 1;

export interface Grid {
  rows: number;
  cols: number;
  channels: number;
  nodata: number | null;
  values: Float32Array; // length rows*cols*channels
}

export class FormatError extends Error {}

export function decodeGrid(buffer: Buffer): Grid {
  if (buffer.length < HEADER_SIZE) {
    throw new FormatError(`header truncated at ${buffer.length} bytes`);
  }
  const view = new DataView(buffer.buffer, buffer.byteOffset, buffer.byteLength);
  if (view.getUint32(0, true) !== MAGIC) {
    throw new FormatError("bad magic");
  }
  const version = view.getUint32(4, true);
  if (version !== VERSION) {
    throw new FormatError(`unsupported version ${version}`);
  }
  const rows = Number(view.getBigUint64(8, true));
  const cols = Number(view.getBigUint64(16, true));
  const channels = Number(view.getBigUint64(24, true));
  const elem = view.getUint32(32, true);
  const flags = view.getUint32(36, true);
  const nodata = view.getFloat32(40, true);
  if (elem !== 0) {
    throw new FormatError(`unsupported element type code ${elem}`);
  }
  if (rows < 1 || cols < 1 || channels < 1) {
    throw new FormatError(`non-positive dimensions ${rows}x${cols}x${channels}`);
  }
  const count = rows * cols * channels;
  if (buffer.length < HEADER_SIZE + count * 4) {
    throw new FormatError(
      `payload holds ${buffer.length - HEADER_SIZE} bytes, expected ${count * 4}`,
    );
  }
  const values = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    values[i] = view.getFloat32(HEADER_SIZE + i * 4, true);
  }
  return { rows, cols, channels, nodata: flags & 1 ? nodata : null, values };
}

export function encodeGrid(grid: Grid): Buffer {
  const count = grid.rows * grid.cols * grid.channels;
  if (grid.values.length !== count) {
    throw new FormatError("value count disagrees with dimensions");
  }
  const buffer = Buffer.alloc(HEADER_SIZE + count * 4);
  const view = new DataView(buffer.buffer, buffer.byteOffset, buffer.byteLength);
  view.setUint32(0, MAGIC, true);
  view.setUint32(4, VERSION, true);
  view.setBigUint64(8, BigInt(grid.rows), true);
  view.setBigUint64(16, BigInt(grid.cols), true);
  view.setBigUint64(24, BigInt(grid.channels), true);
  view.setUint32(32, 0, true);
  view.setUint32(36, grid.nodata === null ? 0 : 1, true);
  view.setFloat32(40, grid.nodata ?? 0, true);
  for (let i = 0; i < count; i++) {
    view.setFloat32(HEADER_SIZE + i * 4, grid.values[i], true);
  }
  return buffer;
}

export function readGrid(path: string): Grid {
  return decodeGrid(readFileSync(path));
}

export function writeGrid(path: string, grid: Grid): void {
  writeFileSync(path, encodeGrid(grid));
}
