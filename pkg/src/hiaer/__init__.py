"""Hierarchical intention-to-motion pipeline for expressive humanoid gestures.

Stages: multimodal intent inference with Valence-Arousal affect estimation,
affect-modulated gesture selection with a confidence-aware fallback, windowed
motion synthesis at 12.5 FPS, neural retargeting to a 29-joint humanoid, and
a 50 Hz PD tracking simulator, orchestrated asynchronously with latest-wins
hand-offs and an evaluation harness.
"""

__version__ = "0.1.0"
