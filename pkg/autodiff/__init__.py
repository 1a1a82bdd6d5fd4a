"""Autodiff package - Tensor tape, differentiable ops, ParamStore and Adam"""

from autodiff.adam import AdamState, adam_step
from autodiff.params import ParamStore, decode_params, encode_params, load_params
from autodiff.tensor import Parameter, Tensor, backward, constant
