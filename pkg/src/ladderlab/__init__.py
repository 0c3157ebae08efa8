"""Per-title bitrate ladder construction toolkit.

Builds rate-distortion convex hulls and bitrate ladders, extracts
handcrafted video complexity features, trains seeded tree-ensemble
regressors for the cross-over bitrates (P1, P2, P3), and benchmarks
predicted ladders against exhaustive-encoding and static baselines.
"""

__version__ = "0.1.0"
