/**
 * Feature backbones.
 *
 * `patchstats` is built in and needs no weights: eight channels per patch
 * cell (mean R/G/B, in-patch edge energy, normalized x/y, mean intensity,
 * intensity variance) — the same contract the engine's synthetic scenes
 * use, so bridge exports drop straight into an existing bank.
 *
 * Pretrained backbones are registered by name only: selecting one without
 * its checkpoint raises explicit fetch instructions. Nothing is downloaded
 * silently; any runtime that produces a C x H' x W' grid can write the
 * same .sltf contract.
 */

import { existsSync } from 'fs'
import type { RgbImage } from './image.js'
import type { Tensor } from './sltf.js'

export interface ExternalBackbone {
  name: string
  channels: number
  fetchUrl: string
}

export const EXTERNAL_BACKBONES: Record<string, ExternalBackbone> = {
  'dinov2-s': {
    name: 'dinov2-s',
    channels: 384,
    fetchUrl: 'https://dl.fbaipublicfiles.com/dinov2/dinov2_vits14/dinov2_vits14_pretrain.pth'
  }
}

export function checkpointError(name: string, checkpoint?: string): Error {
  const spec = EXTERNAL_BACKBONES[name]
  const lines = [
    `backbone '${name}' needs its pretrained checkpoint and no checkpoint was found` +
      (checkpoint ? ` at ${checkpoint}` : ''),
    `fetch it yourself (nothing is downloaded silently):`,
    `  url: ${spec.fetchUrl}`,
    `  verify the file hash against the official release manifest before use`,
    `then run inference with your own runtime and export C x H' x W' grids`,
    `as .sltf files — or use '--backbone patchstats', which needs no weights.`
  ]
  return new Error(lines.join('\n'))
}

export const PATCHSTATS_CHANNELS = 8

/** Patch-statistics features on an RGB image; patch must divide both sides. */
export function patchstatsFeatures(img: RgbImage, patch: number): Tensor {
  const { width, height, data } = img
  if (width % patch || height % patch) {
    throw new Error(`image ${width}x${height} not divisible by patch ${patch}`)
  }
  const hb = height / patch
  const wb = width / patch
  const c = PATCHSTATS_CHANNELS
  const out = new Float64Array(c * hb * wb)
  const cell = (ch: number, by: number, bx: number) => ch * hb * wb + by * wb + bx

  for (let by = 0; by < hb; by++) {
    for (let bx = 0; bx < wb; bx++) {
      let sumR = 0
      let sumG = 0
      let sumB = 0
      let sumI = 0
      let sumI2 = 0
      let dxAbs = 0
      let dyAbs = 0
      for (let py = 0; py < patch; py++) {
        for (let px = 0; px < patch; px++) {
          const idx = ((by * patch + py) * width + (bx * patch + px)) * 3
          const r = data[idx]
          const g = data[idx + 1]
          const b = data[idx + 2]
          const inten = (r + g + b) / 3
          sumR += r
          sumG += g
          sumB += b
          sumI += inten
          sumI2 += inten * inten
          if (px + 1 < patch) {
            const j = ((by * patch + py) * width + (bx * patch + px + 1)) * 3
            dxAbs += Math.abs((data[j] + data[j + 1] + data[j + 2]) / 3 - inten)
          }
          if (py + 1 < patch) {
            const j = ((by * patch + py + 1) * width + (bx * patch + px)) * 3
            dyAbs += Math.abs((data[j] + data[j + 1] + data[j + 2]) / 3 - inten)
          }
        }
      }
      const n = patch * patch
      const meanI = sumI / n
      out[cell(0, by, bx)] = sumR / n
      out[cell(1, by, bx)] = sumG / n
      out[cell(2, by, bx)] = sumB / n
      out[cell(3, by, bx)] = dxAbs / (patch * (patch - 1)) + dyAbs / (patch * (patch - 1))
      out[cell(4, by, bx)] = (bx + 0.5) / wb
      out[cell(5, by, bx)] = (by + 0.5) / hb
      out[cell(6, by, bx)] = meanI
      out[cell(7, by, bx)] = sumI2 / n - meanI * meanI
    }
  }
  return { dtype: 'f32', shape: [c, hb, wb], data: Float32Array.from(out) }
}

export function extractFeatures(
  img: RgbImage,
  backbone: string,
  patch: number,
  checkpoint?: string
): Tensor {
  if (backbone === 'patchstats') return patchstatsFeatures(img, patch)
  if (backbone in EXTERNAL_BACKBONES) {
    if (!checkpoint || !existsSync(checkpoint)) throw checkpointError(backbone, checkpoint)
    throw new Error(
      `backbone '${backbone}': in-process inference is not bundled; run the ` +
        `checkpoint in your own runtime and export .sltf grids (see README)`
    )
  }
  throw new Error(
    `unknown backbone '${backbone}'; available: patchstats, ` +
      Object.keys(EXTERNAL_BACKBONES).join(', ')
  )
}
