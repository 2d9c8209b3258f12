/**
 * Binary tensor container (.sltf) shared with the detection engine.
 *
 * Layout, all integers little-endian:
 *   magic "SLTF" | version u8 (=1) | dtype u8 (1=f32, 2=u8) | rank u8 (1..4)
 *   | rank * u32 dims | row-major payload, last axis fastest.
 */

import { readFileSync, writeFileSync } from 'fs'

export const MAGIC = 'SLTF'
export const VERSION = 1
export const DTYPE_F32 = 1
export const DTYPE_U8 = 2
const MAX_RANK = 4

export type Dtype = 'f32' | 'u8'

export interface Tensor {
  dtype: Dtype
  shape: number[]
  /** row-major elements; Float32Array for f32, Uint8Array for u8 */
  data: Float32Array | Uint8Array
}

function elementCount(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1)
}

function checkShape(shape: number[]): void {
  if (shape.length < 1 || shape.length > MAX_RANK) {
    throw new Error(`rank ${shape.length} outside supported range 1..${MAX_RANK}`)
  }
  for (const d of shape) {
    if (!Number.isInteger(d) || d < 1) throw new Error(`bad dimension ${d} in shape [${shape}]`)
  }
}

export function encodeTensor(t: Tensor): Buffer {
  checkShape(t.shape)
  const n = elementCount(t.shape)
  if (t.data.length !== n) {
    throw new Error(`shape [${t.shape}] implies ${n} elements, got ${t.data.length}`)
  }
  const code = t.dtype === 'f32' ? DTYPE_F32 : DTYPE_U8
  const itemSize = t.dtype === 'f32' ? 4 : 1
  const header = Buffer.alloc(7 + 4 * t.shape.length)
  header.write(MAGIC, 0, 'ascii')
  header.writeUInt8(VERSION, 4)
  header.writeUInt8(code, 5)
  header.writeUInt8(t.shape.length, 6)
  t.shape.forEach((d, i) => header.writeUInt32LE(d, 7 + 4 * i))
  const payload = Buffer.alloc(n * itemSize)
  if (t.dtype === 'f32') {
    for (let i = 0; i < n; i++) payload.writeFloatLE((t.data as Float32Array)[i], i * 4)
  } else {
    payload.set(t.data as Uint8Array)
  }
  return Buffer.concat([header, payload])
}

export function decodeTensor(buf: Buffer): Tensor {
  if (buf.length < 7) throw new Error('header truncated')
  if (buf.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error(`bad magic ${JSON.stringify(buf.toString('ascii', 0, 4))}`)
  }
  const version = buf.readUInt8(4)
  if (version !== VERSION) throw new Error(`unsupported version ${version}`)
  const code = buf.readUInt8(5)
  if (code !== DTYPE_F32 && code !== DTYPE_U8) throw new Error(`unknown dtype code ${code}`)
  const rank = buf.readUInt8(6)
  if (rank < 1 || rank > MAX_RANK) throw new Error(`rank ${rank} outside 1..${MAX_RANK}`)
  const dimsEnd = 7 + 4 * rank
  if (buf.length < dimsEnd) throw new Error('dimension header truncated')
  const shape: number[] = []
  for (let i = 0; i < rank; i++) shape.push(buf.readUInt32LE(7 + 4 * i))
  checkShape(shape)
  const n = elementCount(shape)
  const itemSize = code === DTYPE_F32 ? 4 : 1
  const payload = buf.subarray(dimsEnd)
  if (payload.length < n * itemSize) {
    throw new Error(`payload truncated (${payload.length} of ${n * itemSize} bytes)`)
  }
  if (payload.length > n * itemSize) {
    throw new Error(`payload longer than shape implies (${payload.length} > ${n * itemSize})`)
  }
  if (code === DTYPE_U8) {
    return { dtype: 'u8', shape, data: Uint8Array.from(payload) }
  }
  const data = new Float32Array(n)
  for (let i = 0; i < n; i++) data[i] = payload.readFloatLE(i * 4)
  return { dtype: 'f32', shape, data }
}

export function writeTensor(t: Tensor, path: string): void {
  writeFileSync(path, encodeTensor(t))
}

export function readTensor(path: string): Tensor {
  return decodeTensor(readFileSync(path))
}
