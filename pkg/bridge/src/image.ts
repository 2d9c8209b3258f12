/** PNG decoding and bilinear resizing to the working resolution. */

import { readFileSync } from 'fs'
import { PNG } from 'pngjs'

export interface RgbImage {
  width: number
  height: number
  /** row-major RGB triplets in [0, 1] */
  data: Float64Array
}

export function readPng(path: string): RgbImage {
  const png = PNG.sync.read(readFileSync(path))
  const out = new Float64Array(png.width * png.height * 3)
  for (let i = 0; i < png.width * png.height; i++) {
    out[i * 3] = png.data[i * 4] / 255
    out[i * 3 + 1] = png.data[i * 4 + 1] / 255
    out[i * 3 + 2] = png.data[i * 4 + 2] / 255
  }
  return { width: png.width, height: png.height, data: out }
}

/** Bilinear resize with pixel-center alignment and edge clamping. */
export function resizeRgb(img: RgbImage, width: number, height: number): RgbImage {
  if (img.width === width && img.height === height) return img
  const out = new Float64Array(width * height * 3)
  for (let y = 0; y < height; y++) {
    const sy = ((y + 0.5) * img.height) / height - 0.5
    const y0 = Math.max(0, Math.min(img.height - 1, Math.floor(sy)))
    const y1 = Math.min(img.height - 1, y0 + 1)
    const wy = Math.min(1, Math.max(0, sy - Math.floor(sy)))
    for (let x = 0; x < width; x++) {
      const sx = ((x + 0.5) * img.width) / width - 0.5
      const x0 = Math.max(0, Math.min(img.width - 1, Math.floor(sx)))
      const x1 = Math.min(img.width - 1, x0 + 1)
      const wx = Math.min(1, Math.max(0, sx - Math.floor(sx)))
      for (let c = 0; c < 3; c++) {
        const top =
          img.data[(y0 * img.width + x0) * 3 + c] * (1 - wx) +
          img.data[(y0 * img.width + x1) * 3 + c] * wx
        const bot =
          img.data[(y1 * img.width + x0) * 3 + c] * (1 - wx) +
          img.data[(y1 * img.width + x1) * 3 + c] * wx
        out[(y * width + x) * 3 + c] = top * (1 - wy) + bot * wy
      }
    }
  }
  return { width, height, data: out }
}
