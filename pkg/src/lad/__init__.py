"""Zero-shot logical and structural anomaly detection.

Given feature maps and object masks for a query image plus a bank of
anomaly-free templates, the engine matches query objects to reference
objects via entropic optimal transport and scores each object against a
per-position Gaussian model of its matched references, producing
pixel-level anomaly maps and image-level scores.
"""

__version__ = "0.1.0"
