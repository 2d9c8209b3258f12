"""Bit-exact binary serialization for feature maps, masks, and anomaly maps.

File layout (extension ``.sltf``), all multi-byte integers little-endian:

    offset  size        content
    0       4           magic b"SLTF"
    4       1           version (currently 1)
    5       1           dtype code (1 = f32, 2 = u8)
    6       1           rank (1..4)
    7       4 * rank    u32 dimension lengths
    ...     payload     row-major elements, last axis fastest

The payload is written little-endian regardless of host byte order, so
files round-trip bit-exactly between machines.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    MaskValidationError,
    SltfBadMagic,
    SltfShapeError,
    SltfTruncated,
    SltfUnsupportedDtype,
    SltfUnsupportedVersion,
    SltfWriteError,
)

MAGIC = b"SLTF"
VERSION = 1

DTYPE_F32 = 1
DTYPE_U8 = 2

_CODE_TO_DTYPE = {DTYPE_F32: np.dtype("<f4"), DTYPE_U8: np.dtype("<u1")}
_KIND_TO_CODE = {"f": DTYPE_F32, "u": DTYPE_U8}

MAX_RANK = 4


def _dtype_code(arr: np.ndarray) -> int:
    if arr.dtype == np.float32:
        return DTYPE_F32
    if arr.dtype == np.uint8:
        return DTYPE_U8
    raise SltfShapeError(f"unsupported dtype {arr.dtype}; expected float32 or uint8")


def _check_shape(shape: tuple[int, ...]) -> None:
    if not 1 <= len(shape) <= MAX_RANK:
        raise SltfShapeError(f"rank {len(shape)} outside supported range 1..{MAX_RANK}")
    if any(d < 1 for d in shape):
        raise SltfShapeError(f"all dimensions must be >= 1, got {shape}")


def write_tensor(arr: np.ndarray, path: str | Path) -> None:
    """Write ``arr`` (float32 or uint8, rank 1..4) to ``path``.

    ``read_tensor(path)`` reconstructs the array bit-exactly.
    """
    arr = np.asarray(arr)
    code = _dtype_code(arr)
    _check_shape(arr.shape)
    header = MAGIC + struct.pack("<BBB", VERSION, code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = np.ascontiguousarray(arr, dtype=_CODE_TO_DTYPE[code]).tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise SltfWriteError(f"cannot write {path}: {exc}") from exc


def read_tensor(path: str | Path) -> np.ndarray:
    """Read a tensor container; inverse of :func:`write_tensor`."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise SltfTruncated(f"cannot read {path}: {exc}") from exc

    if len(blob) < 7:
        raise SltfTruncated(f"{path}: header truncated ({len(blob)} bytes)")
    if blob[:4] != MAGIC:
        raise SltfBadMagic(f"{path}: bad magic {blob[:4]!r}")
    version, code, rank = struct.unpack("<BBB", blob[4:7])
    if version != VERSION:
        raise SltfUnsupportedVersion(f"{path}: unsupported version {version}")
    if code not in _CODE_TO_DTYPE:
        raise SltfUnsupportedDtype(f"{path}: unknown dtype code {code}")
    if not 1 <= rank <= MAX_RANK:
        raise SltfShapeError(f"{path}: rank {rank} outside supported range 1..{MAX_RANK}")
    dims_end = 7 + 4 * rank
    if len(blob) < dims_end:
        raise SltfTruncated(f"{path}: dimension header truncated")
    shape = struct.unpack(f"<{rank}I", blob[7:dims_end])
    if any(d < 1 for d in shape):
        raise SltfShapeError(f"{path}: zero-length axis in shape {shape}")
    dtype = _CODE_TO_DTYPE[code]
    expected = int(np.prod(shape)) * dtype.itemsize
    payload = blob[dims_end:]
    if len(payload) < expected:
        raise SltfTruncated(
            f"{path}: payload truncated ({len(payload)} of {expected} bytes)"
        )
    if len(payload) > expected:
        raise SltfShapeError(
            f"{path}: payload longer than shape implies ({len(payload)} > {expected})"
        )
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape)
    # native byte order, writable copy
    return arr.astype(dtype.newbyteorder("="), copy=True)


@dataclass(frozen=True)
class MaskPage:
    """One binary object mask with its pixel count and tight bounding box.

    ``bbox`` is (row_min, col_min, row_max, col_max), inclusive.
    """

    mask: np.ndarray
    area: int
    bbox: tuple[int, int, int, int]


def mask_page_from_array(mask: np.ndarray) -> MaskPage:
    """Validate a binary H x W array and compute its area and tight bbox."""
    if mask.ndim != 2:
        raise MaskValidationError(f"mask must be 2-D, got shape {mask.shape}")
    vals = np.unique(mask)
    if not np.all(np.isin(vals, (0, 1))):
        raise MaskValidationError(f"mask values must be 0/1, got {vals[:8]}")
    area = int(mask.sum())
    if area < 1:
        raise MaskValidationError("mask page has no foreground pixels")
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    bbox = (int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1]))
    return MaskPage(mask=mask.astype(np.uint8), area=area, bbox=bbox)


def load_mask_set(path: str | Path) -> list[MaskPage]:
    """Load a K x H x W uint8 container as a list of validated mask pages."""
    arr = read_tensor(path)
    if arr.dtype != np.uint8 or arr.ndim != 3:
        raise MaskValidationError(
            f"{path}: mask set must be a u8 tensor of shape KxHxW, "
            f"got {arr.dtype} rank {arr.ndim}"
        )
    return [mask_page_from_array(arr[k]) for k in range(arr.shape[0])]


def save_mask_set(pages: list[np.ndarray] | np.ndarray, path: str | Path) -> None:
    """Stack binary H x W masks into a K x H x W u8 container."""
    stack = np.stack([np.asarray(p, dtype=np.uint8) for p in pages])
    write_tensor(stack, path)
