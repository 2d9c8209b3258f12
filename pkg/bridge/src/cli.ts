#!/usr/bin/env node
/**
 * ladx — export images as .sltf feature maps and object masks.
 *
 *   ladx export-features --images dir --out dir [--backbone patchstats]
 *                        [--patch 8] [--image-size 224] [--checkpoint path]
 *   ladx export-masks    --images dir --out dir [--segmenter threshold]
 *                        [--min-area-frac 0.001] [--max-area-frac 0.95]
 *                        [--image-size 224] [--checkpoint path]
 *
 * Outputs one .sltf per image plus manifest.json; the detection engine
 * consumes both directly.
 */

import { existsSync, mkdirSync, readdirSync } from 'fs'
import { basename, join } from 'path'

import { extractFeatures } from './features.js'
import { readPng, resizeRgb } from './image.js'
import type { ExportManifest, ManifestRecord } from './manifest.js'
import { writeManifest } from './manifest.js'
import { filterByArea, samCheckpointError, thresholdSegment } from './masks.js'
import { writeTensor } from './sltf.js'

interface Args {
  [key: string]: string
}

function parseArgs(argv: string[]): { command: string; args: Args } {
  const [command, ...rest] = argv
  const args: Args = {}
  for (let i = 0; i < rest.length; i += 2) {
    const key = rest[i]
    if (!key.startsWith('--') || i + 1 >= rest.length) {
      throw new Error(`bad argument ${key}; flags take one value each`)
    }
    args[key.slice(2)] = rest[i + 1]
  }
  return { command, args }
}

function listPngs(dir: string): string[] {
  if (!existsSync(dir)) throw new Error(`image directory ${dir} does not exist`)
  const entries = readdirSync(dir, { recursive: true, encoding: 'utf8' })
  return entries
    .filter(e => e.toLowerCase().endsWith('.png'))
    .sort()
    .map(e => join(dir, e))
}

function stem(path: string): string {
  return basename(path).replace(/\.png$/i, '')
}

function exportFeatures(args: Args): void {
  const imagesDir = args['images']
  const outDir = args['out']
  if (!imagesDir || !outDir) throw new Error('--images and --out are required')
  const backbone = args['backbone'] ?? 'patchstats'
  const patch = parseInt(args['patch'] ?? '8', 10)
  const size = parseInt(args['image-size'] ?? '224', 10)
  mkdirSync(outDir, { recursive: true })

  const records: ManifestRecord[] = []
  for (const imagePath of listPngs(imagesDir)) {
    const img = resizeRgb(readPng(imagePath), size, size)
    const tensor = extractFeatures(img, backbone, patch, args['checkpoint'])
    const outName = `${stem(imagePath)}_features.sltf`
    writeTensor(tensor, join(outDir, outName))
    records.push({ image: imagePath, features: outName })
  }
  if (!records.length) throw new Error(`no .png images under ${imagesDir}`)
  const manifest: ExportManifest = {
    format: 'lad-export-manifest',
    version: 1,
    kind: 'features',
    backbone,
    upsample_source: 'core',
    records
  }
  console.log(`features for ${records.length} images -> ${writeManifest(outDir, manifest)}`)
}

function exportMasks(args: Args): void {
  const imagesDir = args['images']
  const outDir = args['out']
  if (!imagesDir || !outDir) throw new Error('--images and --out are required')
  const segmenter = args['segmenter'] ?? 'threshold'
  if (segmenter === 'sam') {
    const ckpt = args['checkpoint']
    if (!ckpt || !existsSync(ckpt)) throw samCheckpointError(ckpt)
    throw new Error(
      `segmenter 'sam': in-process inference is not bundled; run the checkpoint ` +
        `in your own runtime and export K x H x W u8 .sltf masks (see README)`
    )
  }
  if (segmenter !== 'threshold') throw new Error(`unknown segmenter '${segmenter}'`)
  const minFrac = parseFloat(args['min-area-frac'] ?? '0.001')
  const maxFrac = parseFloat(args['max-area-frac'] ?? '0.95')
  const size = parseInt(args['image-size'] ?? '224', 10)
  mkdirSync(outDir, { recursive: true })

  const records: ManifestRecord[] = []
  for (const imagePath of listPngs(imagesDir)) {
    const img = resizeRgb(readPng(imagePath), size, size)
    const seg = filterByArea(thresholdSegment(img), minFrac, maxFrac)
    if (!seg.pages.length) {
      records.push({ image: imagePath, no_objects: true })
      continue
    }
    const k = seg.pages.length
    const stacked = new Uint8Array(k * size * size)
    seg.pages.forEach((page, i) => stacked.set(page.mask, i * size * size))
    const outName = `${stem(imagePath)}_masks.sltf`
    writeTensor({ dtype: 'u8', shape: [k, size, size], data: stacked }, join(outDir, outName))
    records.push({ image: imagePath, masks: outName })
  }
  if (!records.length) throw new Error(`no .png images under ${imagesDir}`)
  const manifest: ExportManifest = {
    format: 'lad-export-manifest',
    version: 1,
    kind: 'masks',
    segmenter,
    upsample_source: 'core',
    records
  }
  console.log(`masks for ${records.length} images -> ${writeManifest(outDir, manifest)}`)
}

export function main(argv: string[]): number {
  try {
    const { command, args } = parseArgs(argv)
    if (command === 'export-features') exportFeatures(args)
    else if (command === 'export-masks') exportMasks(args)
    else {
      console.error('usage: ladx export-features|export-masks --images dir --out dir [flags]')
      return 2
    }
    return 0
  } catch (err) {
    console.error(`ladx: ${err instanceof Error ? err.message : err}`)
    return 1
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(basename(process.argv[1]))
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)))
}
