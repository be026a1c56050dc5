# Copyright 2026 The STDN Desk Authors
# SPDX-License-Identifier: Apache-2.0

"""Spoof trace disentanglement for face anti-spoofing, desk scale."""

from stdn._core import (
    ConfigError,
    DegenerateGeometryError,
    DimensionError,
    DomainError,
    NumericError,
    Trainer,
    alpha0_grid,
    calibrate_alpha0,
    compose,
    esr_loss,
    gen_dataset,
    gen_live,
    gen_spoof,
    pixel_loss,
    reconstruct_live,
    roc_metrics,
    run_cli,
    score,
    sparse_to_dense,
    synthesize_spoof,
    total_generator_loss,
    total_supervision_loss,
    warp_trace,
)

__all__ = [name for name in dir() if not name.startswith("_")]
