"""Desk-scale mmWave human pose estimation.

Subpackages: tensor/optim (autodiff core), radar (FMCW simulator and FFT
pipeline), features (dual-domain feature math), model (gated cross-attention
pose regressor), training, metrics, storage (file formats), cli.
"""

__version__ = "0.1.0"
