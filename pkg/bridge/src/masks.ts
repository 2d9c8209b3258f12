/**
 * Object mask generation without pretrained weights.
 *
 * The built-in `threshold` segmenter targets flat-color scenes (like the
 * engine's synthetic suite): it estimates the outer background color from
 * the border, finds one dominant container/board color in the interior,
 * marks everything else as object pixels, cleans anti-alias rims with a
 * 3x3 opening, and splits objects by connected components. A pretrained
 * `sam` entry exists in name only; selecting it raises fetch instructions.
 */

import type { RgbImage } from './image.js'

export interface MaskPage {
  /** binary H x W grid, row-major */
  mask: Uint8Array
  area: number
  /** mean color of the component, set by the object segmenter */
  color?: [number, number, number]
  /** inclusive row/col bounds, set by the object segmenter */
  bbox?: [number, number, number, number]
}

export interface Segmentation {
  pages: MaskPage[]
  width: number
  height: number
}

const QUANT = 16
const COLOR_THR = 0.12
const MIN_FRAGMENT = 8

export const SAM_FETCH_URL =
  'https://dl.fbaipublicfiles.com/segment_anything/sam_vit_h_4b8939.pth'

export function samCheckpointError(checkpoint?: string): Error {
  return new Error(
    [
      `segmenter 'sam' needs its pretrained checkpoint and no checkpoint was found` +
        (checkpoint ? ` at ${checkpoint}` : ''),
      `fetch it yourself (nothing is downloaded silently):`,
      `  url: ${SAM_FETCH_URL}`,
      `  verify the file hash against the official release manifest before use`,
      `then export its per-object masks as K x H x W u8 .sltf files — or use`,
      `'--segmenter threshold', which needs no weights.`
    ].join('\n')
  )
}

function colorKey(r: number, g: number, b: number): number {
  const q = (v: number) => Math.min(QUANT - 1, Math.floor(v * QUANT))
  return (q(r) * QUANT + q(g)) * QUANT + q(b)
}

function dist2(a: [number, number, number], b: [number, number, number]): number {
  const dr = a[0] - b[0]
  const dg = a[1] - b[1]
  const db = a[2] - b[2]
  return dr * dr + dg * dg + db * db
}

interface ColorBin {
  count: number
  sum: [number, number, number]
}

function dominantColor(
  img: RgbImage,
  include: (x: number, y: number) => boolean,
  exclude?: [number, number, number]
): [number, number, number] | null {
  const bins = new Map<number, ColorBin>()
  for (let y = 0; y < img.height; y++) {
    for (let x = 0; x < img.width; x++) {
      if (!include(x, y)) continue
      const i = (y * img.width + x) * 3
      const r = img.data[i]
      const g = img.data[i + 1]
      const b = img.data[i + 2]
      if (exclude && dist2([r, g, b], exclude) < COLOR_THR * COLOR_THR) continue
      const key = colorKey(r, g, b)
      const bin = bins.get(key) ?? { count: 0, sum: [0, 0, 0] }
      bin.count += 1
      bin.sum[0] += r
      bin.sum[1] += g
      bin.sum[2] += b
      bins.set(key, bin)
    }
  }
  let best: ColorBin | null = null
  for (const bin of bins.values()) {
    if (!best || bin.count > best.count) best = bin
  }
  if (!best || best.count < img.width * img.height * 0.02) return null
  return [best.sum[0] / best.count, best.sum[1] / best.count, best.sum[2] / best.count]
}

function morph(src: Uint8Array, width: number, height: number, erode: boolean): Uint8Array {
  const out = new Uint8Array(src.length)
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      let acc = erode ? 1 : 0
      for (let dy = -1; dy <= 1; dy++) {
        for (let dx = -1; dx <= 1; dx++) {
          const yy = Math.min(height - 1, Math.max(0, y + dy))
          const xx = Math.min(width - 1, Math.max(0, x + dx))
          const v = src[yy * width + xx]
          acc = erode ? Math.min(acc, v) : Math.max(acc, v)
        }
      }
      out[y * width + x] = acc
    }
  }
  return out
}

function opening(src: Uint8Array, width: number, height: number): Uint8Array {
  return morph(morph(src, width, height, true), width, height, false)
}

function components(
  binary: Uint8Array,
  width: number,
  height: number,
  img?: RgbImage,
  seeds?: Uint8Array
): MaskPage[] {
  // plain flood fill unless colors are given; with colors, grow each
  // component only through pixels close to its seed color, so touching
  // objects of different colors stay separate (seeds are eroded cores,
  // keeping anti-alias rims from seeding their own fragments)
  const labels = new Int32Array(binary.length).fill(-1)
  const pages: MaskPage[] = []
  const stack: number[] = []
  const starts = seeds ?? binary
  let next = 0
  for (let start = 0; start < binary.length; start++) {
    if (!starts[start] || !binary[start] || labels[start] >= 0) continue
    const seedColor: [number, number, number] | null = img
      ? [img.data[start * 3], img.data[start * 3 + 1], img.data[start * 3 + 2]]
      : null
    const mask = new Uint8Array(binary.length)
    let area = 0
    const colorSum: [number, number, number] = [0, 0, 0]
    let r0 = height
    let r1 = -1
    let c0 = width
    let c1 = -1
    labels[start] = next
    stack.push(start)
    while (stack.length) {
      const idx = stack.pop()!
      mask[idx] = 1
      area += 1
      const y = Math.floor(idx / width)
      const x = idx - y * width
      if (img) {
        colorSum[0] += img.data[idx * 3]
        colorSum[1] += img.data[idx * 3 + 1]
        colorSum[2] += img.data[idx * 3 + 2]
      }
      r0 = Math.min(r0, y)
      r1 = Math.max(r1, y)
      c0 = Math.min(c0, x)
      c1 = Math.max(c1, x)
      for (let dy = -1; dy <= 1; dy++) {
        for (let dx = -1; dx <= 1; dx++) {
          const yy = y + dy
          const xx = x + dx
          if (yy < 0 || yy >= height || xx < 0 || xx >= width) continue
          const j = yy * width + xx
          if (!binary[j] || labels[j] >= 0) continue
          if (seedColor) {
            const px: [number, number, number] = [
              img!.data[j * 3],
              img!.data[j * 3 + 1],
              img!.data[j * 3 + 2]
            ]
            if (dist2(px, seedColor) > COLOR_THR * COLOR_THR) continue
          }
          labels[j] = next
          stack.push(j)
        }
      }
    }
    next += 1
    if (area >= MIN_FRAGMENT) {
      pages.push({
        mask,
        area,
        color: img
          ? [colorSum[0] / area, colorSum[1] / area, colorSum[2] / area]
          : undefined,
        bbox: [r0, c0, r1, c1]
      })
    }
  }
  // components are discovered in scan order of their first seed pixel,
  // which keeps the page order deterministic
  return pages
}

const MERGE_GAP = 6

function bboxGap(a: [number, number, number, number], b: [number, number, number, number]): number {
  const dy = Math.max(0, Math.max(a[0], b[0]) - Math.min(a[2], b[2]))
  const dx = Math.max(0, Math.max(a[1], b[1]) - Math.min(a[3], b[3]))
  return Math.max(dy, dx)
}

/**
 * Rejoin pieces of one object that an occluder split apart: same mean
 * color, bounding boxes within a few pixels. Distinct grid objects of the
 * same class sit a whole cell apart and never merge.
 */
function mergeSplitFragments(pages: MaskPage[]): MaskPage[] {
  const merged: MaskPage[] = []
  for (const page of pages) {
    const host = merged.find(
      m =>
        m.color !== undefined &&
        page.color !== undefined &&
        dist2(m.color, page.color) < COLOR_THR * COLOR_THR &&
        bboxGap(m.bbox!, page.bbox!) <= MERGE_GAP
    )
    if (!host) {
      merged.push({ ...page, mask: Uint8Array.from(page.mask) })
      continue
    }
    for (let i = 0; i < host.mask.length; i++) {
      if (page.mask[i]) host.mask[i] = 1
    }
    const n = host.area + page.area
    host.color = [
      (host.color![0] * host.area + page.color![0] * page.area) / n,
      (host.color![1] * host.area + page.color![1] * page.area) / n,
      (host.color![2] * host.area + page.color![2] * page.area) / n
    ]
    host.bbox = [
      Math.min(host.bbox![0], page.bbox![0]),
      Math.min(host.bbox![1], page.bbox![1]),
      Math.max(host.bbox![2], page.bbox![2]),
      Math.max(host.bbox![3], page.bbox![3])
    ]
    host.area = n
  }
  return merged
}

/** Segment a flat-color scene into a board page (if any) plus object pages. */
export function thresholdSegment(img: RgbImage): Segmentation {
  const { width, height } = img
  const border = (x: number, y: number) =>
    x < 2 || y < 2 || x >= width - 2 || y >= height - 2
  const bg = dominantColor(img, border)
  if (!bg) return { pages: [], width, height }
  const board = dominantColor(img, (x, y) => !border(x, y), bg)

  const isObject = new Uint8Array(width * height)
  const isBoard = new Uint8Array(width * height)
  const thr2 = COLOR_THR * COLOR_THR
  for (let i = 0; i < width * height; i++) {
    const px: [number, number, number] = [
      img.data[i * 3],
      img.data[i * 3 + 1],
      img.data[i * 3 + 2]
    ]
    const nearBg = dist2(px, bg) < thr2
    const nearBoard = board !== null && dist2(px, board) < thr2
    if (nearBoard) isBoard[i] = 1
    else if (!nearBg) isObject[i] = 1
  }

  const pages: MaskPage[] = []
  if (board) {
    const cleaned = components(opening(isBoard, width, height), width, height)
    if (cleaned.length) {
      // visible board = its largest component (holes where objects sit)
      const biggest = cleaned.reduce((a, b) => (b.area > a.area ? b : a))
      pages.push(biggest)
    }
  }
  const opened = opening(isObject, width, height)
  const cores = morph(isObject, width, height, true)
  pages.push(...mergeSplitFragments(components(opened, width, height, img, cores)))
  return { pages, width, height }
}

/** Keep pages whose area in pixels falls inside the fraction bounds. */
export function filterByArea(
  seg: Segmentation,
  minFrac: number,
  maxFrac: number
): Segmentation {
  const total = seg.width * seg.height
  const lo = Math.ceil(minFrac * total)
  const hi = Math.floor(maxFrac * total)
  return {
    ...seg,
    pages: seg.pages.filter(p => p.area >= lo && p.area <= hi)
  }
}
