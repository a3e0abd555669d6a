# Copyright 2026 The elfatt Authors
# SPDX-License-Identifier: Apache-2.0

"""ELFATT attention kernels, exact references and error bounds."""

from ._elfatt import (
    ConfigError,
    ConvergenceError,
    DegeneracyError,
    DivisibilityError,
    Error,
    InsufficientDataError,
    IoError,
    OverflowError,
    ShapeError,
    block_sparse_attention,
    bounds,
    effatt_attention,
    elfatt_attention,
    flops_estimate,
    load_matrix,
    norm,
    performer_attention,
    save_matrix,
    vanilla_attention,
)

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DegeneracyError",
    "DivisibilityError",
    "Error",
    "InsufficientDataError",
    "IoError",
    "OverflowError",
    "ShapeError",
    "block_sparse_attention",
    "bounds",
    "effatt_attention",
    "elfatt_attention",
    "flops_estimate",
    "load_matrix",
    "norm",
    "performer_attention",
    "save_matrix",
    "vanilla_attention",
]
