/** Export manifest shared with the engine's scene-bundle conventions. */

import { writeFileSync } from 'fs'
import { join } from 'path'

export interface ManifestRecord {
  image: string
  features?: string
  masks?: string
  no_objects?: boolean
}

export interface ExportManifest {
  format: 'lad-export-manifest'
  version: 1
  kind: 'features' | 'masks'
  backbone?: string
  segmenter?: string
  upsample_source: 'bridge' | 'core'
  records: ManifestRecord[]
}

export function writeManifest(outDir: string, manifest: ExportManifest): string {
  const path = join(outDir, 'manifest.json')
  writeFileSync(path, JSON.stringify(manifest, null, 2) + '\n')
  return path
}
