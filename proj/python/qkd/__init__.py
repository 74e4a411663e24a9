"""Python bindings for the qkd C++ core."""

from ._core import (
    N_QUBITS,
    N_THETA,
    FoldSplit,
    Metrics,
    QkdError,
    WaveletCoeffs,
    Window,
    binary_metrics,
    denoise,
    dwt,
    idwt,
    kd_loss,
    kd_loss_grad,
    param_counts,
    read_windows,
    run_cli,
    stratified_kfold,
    synthesize,
    vqc_forward,
    write_windows,
)

__all__ = [
    "N_QUBITS",
    "N_THETA",
    "FoldSplit",
    "Metrics",
    "QkdError",
    "WaveletCoeffs",
    "Window",
    "binary_metrics",
    "denoise",
    "dwt",
    "idwt",
    "kd_loss",
    "kd_loss_grad",
    "param_counts",
    "read_windows",
    "run_cli",
    "stratified_kfold",
    "synthesize",
    "vqc_forward",
    "write_windows",
]
