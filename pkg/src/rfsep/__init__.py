"""RF co-channel source separation toolkit.

A separator network with learnable dilation rates, the autodiff engine it
runs on, complex-baseband signal synthesis (QPSK, OFDM-QPSK, interference
surrogates), deterministic dataset generation, training, and BER/MSE
evaluation.
"""

__version__ = "0.1.0"

from ._backend import BACKEND_NAME
from .autodiff import (DilationParam, Tensor, add, backward, conv1d_frac,
                       conv1x1, gated_unit, mse_loss, relu, smul)
from .optim import Adam, AdamState, adam_step

__all__ = [
    "BACKEND_NAME", "Tensor", "DilationParam", "conv1d_frac", "conv1x1",
    "gated_unit", "mse_loss", "relu", "add", "smul", "backward",
    "Adam", "AdamState", "adam_step", "__version__",
]
