"""Danmaku generation toolkit: parametric shot sequences, sequential GANs,
a deterministic bullet simulator and distribution metrics."""

__version__ = "0.1.0"
