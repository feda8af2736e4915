"""Python access to the samrank training and diagnostics core."""

from ._core import (
    TwoLayerNet,
    active_units,
    config_hash,
    decode_matrix,
    derive_seed,
    encode_matrix,
    feature_rank,
    gradreg_step,
    read_matrix,
    run_checks,
    sam_step,
    sweep,
    train,
    write_matrix,
)

__all__ = [
    "TwoLayerNet",
    "active_units",
    "config_hash",
    "decode_matrix",
    "derive_seed",
    "encode_matrix",
    "feature_rank",
    "gradreg_step",
    "read_matrix",
    "run_checks",
    "sam_step",
    "sweep",
    "train",
    "write_matrix",
]
