"""Pretrain package - siamese kernel-regression pre-training"""

from pretrain.siamese import (
    PairDataset,
    PairSampling,
    PretrainConfig,
    build_pairs,
    kernel_correlation,
    predicted_kernel,
    predicted_kernel_matrix,
    pretrain,
)
