"""Triplet Graph Transformer: a NumPy autodiff core, third-order pair interactions,
three-stage training and stochastic inference."""

__version__ = "0.1.0"
