"""Multiresolution low-rank tensor compression.

A tensor is stored as a sum of tensor-train or CP components, each living
on a grid that is ``bs`` times coarser per mode than the next.
"""

from .cp import ALSInfo, CPTensor, cp_als, cp_to_dense
from .decompose import DecomposeConfig, DecomposeTrace, alternating_decompose, restructured_decompose
from .dense import ElementLimitError, GridSpec, ShapeError, ave, ext, frobenius_norm, inner, mode_contract
from .ms import (
    FormatMismatchError,
    MSTensor,
    StorageReport,
    embed_finest,
    ms_add,
    ms_hadamard,
    ms_mode_contract,
    ms_norm,
    ms_partial_reconstruct,
    ms_reconstruct,
    ms_round,
    ms_scale,
    ms_storage,
    stability_margin,
)
from .svd import jacobi_svd
from .tt import TTTensor, tt_round, tt_svd, tt_to_dense

__version__ = "0.1.0"

__all__ = [
    "ALSInfo",
    "CPTensor",
    "DecomposeConfig",
    "DecomposeTrace",
    "ElementLimitError",
    "FormatMismatchError",
    "GridSpec",
    "MSTensor",
    "ShapeError",
    "StorageReport",
    "TTTensor",
    "alternating_decompose",
    "ave",
    "cp_als",
    "cp_to_dense",
    "embed_finest",
    "ext",
    "frobenius_norm",
    "inner",
    "jacobi_svd",
    "mode_contract",
    "ms_add",
    "ms_hadamard",
    "ms_mode_contract",
    "ms_norm",
    "ms_partial_reconstruct",
    "ms_reconstruct",
    "ms_round",
    "ms_scale",
    "ms_storage",
    "restructured_decompose",
    "stability_margin",
    "tt_round",
    "tt_svd",
    "tt_to_dense",
]
