import { execFileSync } from 'child_process'
import { mkdtempSync, writeFileSync } from 'fs'
import { tmpdir } from 'os'
import { join } from 'path'
import { describe, expect, it } from 'vitest'

import { decodeTensor, encodeTensor, readTensor, writeTensor } from '../src/sltf'

function python(code: string): string {
  return execFileSync('python3', ['-c', code], { encoding: 'utf8' }).trim()
}

describe('container byte layout', () => {
  it('writes the exact header and little-endian payload', () => {
    const buf = encodeTensor({
      dtype: 'f32',
      shape: [2, 2],
      data: Float32Array.from([1, 2, 3, 4])
    })
    expect(buf.subarray(0, 4).toString('ascii')).toBe('SLTF')
    expect(buf.readUInt8(4)).toBe(1) // version
    expect(buf.readUInt8(5)).toBe(1) // f32 code
    expect(buf.readUInt8(6)).toBe(2) // rank
    expect(buf.readUInt32LE(7)).toBe(2)
    expect(buf.readUInt32LE(11)).toBe(2)
    expect(buf.readFloatLE(15)).toBe(1)
    expect(buf.length).toBe(15 + 16)
  })

  it('round-trips f32 and u8 tensors bit-exactly', () => {
    const f = {
      dtype: 'f32' as const,
      shape: [3, 2],
      data: Float32Array.from([0.1, -1e-30, 3.5, 7, 0, 2 ** 20])
    }
    const back = decodeTensor(encodeTensor(f))
    expect(Buffer.from(back.data.buffer).equals(Buffer.from(f.data.buffer))).toBe(true)
    const u = { dtype: 'u8' as const, shape: [4], data: Uint8Array.from([0, 1, 128, 255]) }
    expect(decodeTensor(encodeTensor(u)).data).toEqual(u.data)
  })

  it('rejects bad magic, truncation, and bad shapes', () => {
    expect(() => decodeTensor(Buffer.from('XXXXxxxxxxxx'))).toThrow(/bad magic/)
    const good = encodeTensor({ dtype: 'u8', shape: [4], data: Uint8Array.from([1, 2, 3, 4]) })
    expect(() => decodeTensor(good.subarray(0, good.length - 1))).toThrow(/truncated/)
    expect(() =>
      encodeTensor({ dtype: 'u8', shape: [0], data: Uint8Array.from([]) })
    ).toThrow(/bad dimension/)
    expect(() =>
      encodeTensor({ dtype: 'u8', shape: [2], data: Uint8Array.from([1]) })
    ).toThrow(/implies 2 elements/)
  })
})

describe('cross-language round trip', () => {
  it('files written here load bit-exactly in the engine', () => {
    const dir = mkdtempSync(join(tmpdir(), 'ladx-'))
    const path = join(dir, 'probe.sltf')
    const values = Float32Array.from([0.1, 0.2, 0.30000001, -4.75, 1e-20, 123456.78])
    writeTensor({ dtype: 'f32', shape: [1, 2, 3], data: values }, path)
    const report = python(
      `
import numpy as np
from lad.tensor_store import read_tensor
t = read_tensor(${JSON.stringify(path)})
print(t.dtype, t.shape, t.astype('<f4').tobytes().hex())
`.trim()
    )
    const [dtype, ...rest] = report.split(' ')
    expect(dtype).toBe('float32')
    expect(rest.slice(0, 3).join(' ')).toBe('(1, 2, 3)')
    const hex = rest[rest.length - 1]
    expect(hex).toBe(Buffer.from(values.buffer).toString('hex'))
  })

  it('files written by the engine decode bit-exactly here', () => {
    const dir = mkdtempSync(join(tmpdir(), 'ladx-'))
    const path = join(dir, 'engine.sltf')
    python(
      `
import numpy as np
from lad.tensor_store import write_tensor
rng = np.random.default_rng(5)
write_tensor(rng.standard_normal((2, 3, 4)).astype(np.float32), ${JSON.stringify(path)})
`.trim()
    )
    const t = readTensor(path)
    expect(t.dtype).toBe('f32')
    expect(t.shape).toEqual([2, 3, 4])
    const expectHex = python(
      `
import numpy as np
rng = np.random.default_rng(5)
print(rng.standard_normal((2, 3, 4)).astype('<f4').tobytes().hex())
`.trim()
    )
    expect(Buffer.from((t.data as Float32Array).buffer).toString('hex')).toBe(expectHex)
  })
})
