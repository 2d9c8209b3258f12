"""Template bank walkthrough: build, coreset-reduce, and query by image.

Retrieval is image-level: whole feature maps are flattened and compared
with the exact Euclidean metric, so the nearest templates are guaranteed
anomaly-free scenes that look most like the query.
"""

import numpy as np

from lad.bank import build_bank, coreset_subsample, covering_radius, image_nns
from lad.synthlab import SceneSpec, generate_scene

# twelve anomaly-free scenes become the bank
bundles = [(f"scene_{i:02d}", generate_scene(SceneSpec(seed=100 + i))) for i in range(12)]
bank = build_bank([(name, b.features) for name, b in bundles])
print(f"bank: {len(bank)} templates, each {bank.shape} -> {bank.flat.shape[1]} floats")

# greedy k-center keeps the 4 most mutually distant templates
reduced = coreset_subsample(bank, m=4, seed=0)
print("coreset ids:", reduced.ids)
print("covering radius all->coreset:", round(covering_radius(bank, reduced.ids), 3))

# a fresh normal scene retrieves its nearest references
query = generate_scene(SceneSpec(seed=999))
result = image_nns(bank, query.features, k=2)
for tid, dist, rank in result.neighbors:
    print(f"rank {rank}: {tid} at distance {dist:.3f}")
