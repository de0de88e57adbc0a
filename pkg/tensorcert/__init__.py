"""Certified low-rank approximation of third-order symmetric tensors."""

__version__ = "0.1.0"
