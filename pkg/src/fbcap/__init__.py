"""Feedback capacity of finite-alphabet sliding-block channels with stationary noise."""

from .prob import (
    Alphabet, CausalKernel, InfoResult, JointPmf, Pmf, causal_factorize, compose, conditional_mi,
    directed_information, directed_information_alt, entropy, mutual_information,
)
from .processes import NoiseModel, SamplePath, block_marginal, gallager_interleave, sample_path, super_decompose
from .channel import ShannonStrategy, SlidingBlockChannel, apply, derived_channel, n_block_law

__version__ = "0.1.0"
