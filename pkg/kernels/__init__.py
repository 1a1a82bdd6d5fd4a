"""Kernels package - WL / SP / GL3 feature maps, normalization and Gram matrices"""

from kernels.feature_maps import (
    FeatureMap,
    WLRelabeler,
    feature_map,
    gl3_feature_map,
    kernel_value,
    normalize,
    sp_feature_map,
    wl_feature_map,
)
from kernels.gram import FeatureBank, GramMatrix, gram_matrix
from kernels.spec import KernelKind, KernelSpec
