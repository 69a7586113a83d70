"""Batch-mean losses.

Both losses sum over output dimensions and average over the batch, so the
per-task gradient magnitude does not depend on how samples are
partitioned.
"""

from __future__ import annotations

import enum

import numpy as np


class NonFiniteError(FloatingPointError):
    """A value left the finite float64 domain (overflow, log(0), ...)."""


class Loss(enum.Enum):
    MSE = "mse"
    BCE = "bce"


def _check_shapes(pred: np.ndarray, target: np.ndarray) -> None:
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {target.shape}")


def loss_value(loss: Loss, pred: np.ndarray, target: np.ndarray) -> float:
    _check_shapes(pred, target)
    if loss is Loss.MSE:
        value = float(np.mean(np.sum((pred - target) ** 2, axis=1)))
    elif loss is Loss.BCE:
        _check_bce_domain(pred)
        per_sample = -(target * np.log(pred) + (1.0 - target) * np.log1p(-pred))
        value = float(np.mean(np.sum(per_sample, axis=1)))
    else:
        raise ValueError(f"unknown loss {loss!r}")
    if not np.isfinite(value):
        raise NonFiniteError(f"{loss.value} loss is not finite")
    return value


def loss_grad(loss: Loss, pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    """d(mean batch loss)/d(pred)."""
    _check_shapes(pred, target)
    batch = pred.shape[0]
    if loss is Loss.MSE:
        return 2.0 * (pred - target) / batch
    if loss is Loss.BCE:
        _check_bce_domain(pred)
        return (pred - target) / (pred * (1.0 - pred)) / batch
    raise ValueError(f"unknown loss {loss!r}")


def _check_bce_domain(pred: np.ndarray) -> None:
    # float64 sigmoid saturates to exactly 0/1 for |logit| > ~37
    if np.any(pred <= 0.0) or np.any(pred >= 1.0):
        raise NonFiniteError("BCE input left (0, 1); output activation saturated")
