/**
 * Minimal deterministic PNG writer (8-bit truecolor, no interlace, no
 * ancillary chunks) plus a heat-map rasterizer for integer grids.
 * zlib.deflateSync with a fixed level is deterministic for a given input,
 * so the same grid always yields byte-identical bytes.
 */
import * as zlib from "node:zlib";
import type { FrameGrid } from "./schema.js";

const CRC_TABLE: number[] = (() => {
  const table = new Array<number>(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Buffer): number {
  let c = 0xffffffff;
  for (const byte of buf) {
    c = CRC_TABLE[(c ^ byte) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, data: Buffer): Buffer {
  const head = Buffer.alloc(4);
  head.writeUInt32BE(data.length, 0);
  const body = Buffer.concat([Buffer.from(type, "ascii"), data]);
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(body), 0);
  return Buffer.concat([head, body, crc]);
}

/** Encode raw RGB pixels (row-major, 3 bytes per pixel) as a PNG. */
export function encodePng(pixels: Buffer, width: number, height: number): Buffer {
  if (pixels.length !== width * height * 3) {
    throw new Error(`pixel buffer is ${pixels.length} bytes, expected ${width * height * 3}`);
  }
  const stride = width * 3;
  const raw = Buffer.alloc((stride + 1) * height);
  for (let y = 0; y < height; y++) {
    raw[y * (stride + 1)] = 0; // filter type: none
    pixels.copy(raw, y * (stride + 1) + 1, y * stride, (y + 1) * stride);
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 2; // color type: truecolor
  ihdr[10] = 0; // compression
  ihdr[11] = 0; // filter
  ihdr[12] = 0; // no interlace
  const idat = zlib.deflateSync(raw, { level: 9 });
  return Buffer.concat([
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk("IHDR", ihdr),
    chunk("IDAT", idat),
    chunk("IEND", Buffer.alloc(0)),
  ]);
}

/** Viridis-like 5-stop color ramp, linearly interpolated. */
const RAMP: [number, number, number][] = [
  [68, 1, 84],
  [59, 82, 139],
  [33, 145, 140],
  [94, 201, 98],
  [253, 231, 37],
];

export function rampColor(t: number): [number, number, number] {
  const clamped = Math.min(1, Math.max(0, t));
  const pos = clamped * (RAMP.length - 1);
  const i = Math.min(RAMP.length - 2, Math.floor(pos));
  const f = pos - i;
  const a = RAMP[i];
  const b = RAMP[i + 1];
  return [
    Math.round(a[0] + (b[0] - a[0]) * f),
    Math.round(a[1] + (b[1] - a[1]) * f),
    Math.round(a[2] + (b[2] - a[2]) * f),
  ];
}

/** Render an integer grid as a heat-map PNG, `scale` pixels per cell. */
export function renderHeatmap(grid: FrameGrid, scale = 4): Buffer {
  const rows = grid.rows;
  const h = rows.length;
  const w = rows[0].length;
  const denom = grid.maxValue || 1;
  const pixels = Buffer.alloc(w * scale * h * scale * 3);
  const rowStride = w * scale * 3;
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      const [r, g, b] = rampColor(rows[y][x] / denom);
      for (let dy = 0; dy < scale; dy++) {
        for (let dx = 0; dx < scale; dx++) {
          const off = (y * scale + dy) * rowStride + (x * scale + dx) * 3;
          pixels[off] = r;
          pixels[off + 1] = g;
          pixels[off + 2] = b;
        }
      }
    }
  }
  return encodePng(pixels, w * scale, h * scale);
}
