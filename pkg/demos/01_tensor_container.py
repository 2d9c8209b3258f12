"""Tensor container walkthrough: write, inspect, and reload .sltf files.

The container is the boundary between the engine and any feature or mask
producer: fixed little-endian layout, bit-exact round trips.
"""

import tempfile
from pathlib import Path

import numpy as np

from lad.tensor_store import load_mask_set, read_tensor, save_mask_set, write_tensor

out = Path(tempfile.mkdtemp(prefix="lad_demo_"))

# a small feature map: 3 channels, 4 x 5 grid
features = np.random.default_rng(0).standard_normal((3, 4, 5)).astype(np.float32)
write_tensor(features, out / "features.sltf")

blob = (out / "features.sltf").read_bytes()
print("file size:", len(blob), "bytes")
print("magic:", blob[:4], "| version:", blob[4], "| dtype code:", blob[5], "| rank:", blob[6])

reloaded = read_tensor(out / "features.sltf")
print("round trip bit-exact:", reloaded.tobytes() == features.tobytes())

# masks travel as K x H x W pages, one object per page
masks = np.zeros((2, 8, 8), dtype=np.uint8)
masks[0, 1:4, 1:4] = 1
masks[1, 5:8, 2:7] = 1
save_mask_set(list(masks), out / "masks.sltf")
for i, page in enumerate(load_mask_set(out / "masks.sltf")):
    print(f"mask {i}: area={page.area} bbox={page.bbox}")
