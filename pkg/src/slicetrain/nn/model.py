"""Flat-parameter model replicas: deterministic initialization, analytic
forward/backward, the SGD update rule, and a finite-difference gradient
checker.

The backward pass is hand-derived per layer; the gradient checker is the
independent numeric route against it (central differences over every
coordinate), so neither can silently validate the other.
"""

from __future__ import annotations

import math

import numpy as np

from ..rng import keyed_rng
from .layers import (
    Concat,
    Embedding,
    LayerSpec,
    Linear,
    ReLU,
    Sequential,
    Sigmoid,
    SpecError,
    input_width,
    iter_param_layers,
    output_width,
    param_count,
    validate,
)
from .losses import Loss, NonFiniteError, loss_grad, loss_value


def init_params(spec: LayerSpec, seed: int) -> np.ndarray:
    """Deterministic flat parameter vector for ``spec``.

    Linear and Embedding weights are uniform in [-a, a] with
    a = sqrt(6 / (fan_in + fan_out)); biases are zero.  Each parametric
    layer draws from its own keyed stream, so the vector is a pure
    function of (spec, seed).
    """
    validate(spec)
    chunks: list[np.ndarray] = []
    for ordinal, layer in enumerate(iter_param_layers(spec)):
        rng = keyed_rng("param-init", seed, ordinal)
        if isinstance(layer, Linear):
            bound = math.sqrt(6.0 / (layer.in_dim + layer.out_dim))
            chunks.append(rng.uniform(-bound, bound, layer.in_dim * layer.out_dim))
            chunks.append(np.zeros(layer.out_dim))
        else:
            bound = math.sqrt(6.0 / (layer.vocab_size + layer.embed_dim))
            chunks.append(rng.uniform(-bound, bound, layer.vocab_size * layer.embed_dim))
    if not chunks:
        return np.zeros(0)
    return np.concatenate(chunks)


# ----------------------------------------------------------------------
# forward / backward engine
#
# Both walks visit the spec tree in the same traversal order as the
# parameter layout.  Forward pushes per-layer saved values onto a scratch
# stack; backward pops them in exact reverse order.


def _as_ids(x: np.ndarray, vocab: int) -> np.ndarray:
    if x.ndim == 2 and x.shape[1] == 1:
        x = x[:, 0]
    if x.ndim != 1:
        raise SpecError(f"embedding ids must be one column, got shape {x.shape}")
    if not np.issubdtype(x.dtype, np.integer):
        if not np.all(x == np.floor(x)):
            raise SpecError("embedding ids must be integral")
        x = x.astype(np.int64)
    if np.any(x < 0) or np.any(x >= vocab):
        raise SpecError(f"embedding id out of range [0, {vocab})")
    return x


def _forward(spec, params, offset, x, scratch):
    if isinstance(spec, Linear):
        w_end = offset + spec.in_dim * spec.out_dim
        weight = params[offset:w_end].reshape(spec.in_dim, spec.out_dim)
        bias = params[w_end : w_end + spec.out_dim]
        if x.ndim != 2 or x.shape[1] != spec.in_dim:
            raise SpecError(f"Linear({spec.in_dim},{spec.out_dim}) got input {x.shape}")
        scratch.append(x)
        return x @ weight + bias, w_end + spec.out_dim
    if isinstance(spec, ReLU):
        scratch.append(x > 0)
        return np.maximum(x, 0.0), offset
    if isinstance(spec, Sigmoid):
        out = 1.0 / (1.0 + np.exp(-x))
        scratch.append(out)
        return out, offset
    if isinstance(spec, Embedding):
        ids = _as_ids(x, spec.vocab_size)
        table = params[offset : offset + param_count(spec)].reshape(
            spec.vocab_size, spec.embed_dim
        )
        scratch.append(ids)
        return table[ids], offset + param_count(spec)
    if isinstance(spec, Concat):
        outs = []
        col = 0
        for part in spec.parts:
            width = input_width(part)
            part_in = x[:, col] if width == 1 else x[:, col : col + width]
            out, offset = _forward(part, params, offset, part_in, scratch)
            outs.append(out)
            col += width
        return np.hstack(outs), offset
    if isinstance(spec, Sequential):
        for layer in spec.layers:
            x, offset = _forward(layer, params, offset, x, scratch)
        return x, offset
    raise SpecError(f"unknown spec {spec!r}")


def _backward(spec, params, offset, grad_out, scratch, grad_flat):
    """Accumulate parameter gradients; return grad wrt this spec's input.

    ``offset`` is the start of this spec's parameter block, exactly as in
    forward.  Returns None where the input has no gradient (integer ids).
    """
    if isinstance(spec, Linear):
        x = scratch.pop()
        w_end = offset + spec.in_dim * spec.out_dim
        weight = params[offset:w_end].reshape(spec.in_dim, spec.out_dim)
        grad_flat[offset:w_end] += (x.T @ grad_out).ravel()
        grad_flat[w_end : w_end + spec.out_dim] += grad_out.sum(axis=0)
        return grad_out @ weight.T
    if isinstance(spec, ReLU):
        mask = scratch.pop()
        return grad_out * mask
    if isinstance(spec, Sigmoid):
        out = scratch.pop()
        return grad_out * out * (1.0 - out)
    if isinstance(spec, Embedding):
        ids = scratch.pop()
        table_grad = grad_flat[offset : offset + param_count(spec)].reshape(
            spec.vocab_size, spec.embed_dim
        )
        np.add.at(table_grad, ids, grad_out)
        return None
    if isinstance(spec, Concat):
        part_offsets = []
        part_out_widths = []
        cursor = offset
        for part in spec.parts:
            part_offsets.append(cursor)
            cursor += param_count(part)
            part_out_widths.append(output_width(part, input_width(part)))
        grads_in = []
        col_end = sum(part_out_widths)
        for part, part_offset, out_w in zip(
            reversed(spec.parts), reversed(part_offsets), reversed(part_out_widths)
        ):
            g = grad_out[:, col_end - out_w : col_end]
            col_end -= out_w
            grads_in.append(_backward(part, params, part_offset, g, scratch, grad_flat))
        grads_in.reverse()
        if any(g is None for g in grads_in):
            return None
        return np.hstack(
            [g if g.ndim == 2 else g[:, None] for g in grads_in]
        )
    if isinstance(spec, Sequential):
        layer_offsets = []
        cursor = offset
        for layer in spec.layers:
            layer_offsets.append(cursor)
            cursor += param_count(layer)
        for layer, layer_offset in zip(reversed(spec.layers), reversed(layer_offsets)):
            if grad_out is None:
                raise SpecError("gradient chain broken before an upstream layer")
            grad_out = _backward(layer, params, layer_offset, grad_out, scratch, grad_flat)
        return grad_out
    raise SpecError(f"unknown spec {spec!r}")


class ModelReplica:
    """One model copy: spec plus a flat float64 parameter vector.

    A replica is confined to a single task at a time; forward/backward
    never mutate the parameters.
    """

    def __init__(self, spec: LayerSpec, params: np.ndarray):
        validate(spec)
        params = np.asarray(params, dtype=np.float64)
        expected = param_count(spec)
        if params.ndim != 1 or params.size != expected:
            raise ValueError(f"expected {expected} parameters, got shape {params.shape}")
        self.spec = spec
        self.params = params.copy()
        self._scratch: list = []

    @property
    def size(self) -> int:
        return self.params.size

    def forward(self, batch: np.ndarray) -> np.ndarray:
        """Output activations; retains intermediates for inspection."""
        self._scratch = []
        out, _ = _forward(self.spec, self.params, 0, np.asarray(batch), self._scratch)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError("non-finite activation in forward pass")
        return out

    def backward(
        self, batch: np.ndarray, target: np.ndarray, loss: Loss
    ) -> tuple[float, np.ndarray]:
        """Mean batch loss and d(loss)/d(params) as a flat vector.

        Runs its own forward pass so the result never depends on stale
        scratch state.
        """
        scratch: list = []
        batch = np.asarray(batch)
        target = np.asarray(target, dtype=np.float64)
        pred, _ = _forward(self.spec, self.params, 0, batch, scratch)
        if not np.all(np.isfinite(pred)):
            raise NonFiniteError("non-finite activation in forward pass")
        value = loss_value(loss, pred, target)
        grad_flat = np.zeros_like(self.params)
        _backward(self.spec, self.params, 0, loss_grad(loss, pred, target), scratch, grad_flat)
        if not np.all(np.isfinite(grad_flat)):
            raise NonFiniteError("non-finite gradient in backward pass")
        return value, grad_flat


def sgd_step(params: np.ndarray, gradient: np.ndarray, learning_rate: float) -> np.ndarray:
    """Pure elementwise update: out = params - lr * gradient.

    Elementwise means applying it per contiguous slice and concatenating
    gives the same result as one whole-vector application, which is what
    slice-owned synchronization relies on.
    """
    params = np.asarray(params, dtype=np.float64)
    gradient = np.asarray(gradient, dtype=np.float64)
    if params.shape != gradient.shape:
        raise ValueError(f"shape mismatch: {params.shape} vs {gradient.shape}")
    if learning_rate <= 0:
        raise ValueError("learning rate must be positive")
    return params - learning_rate * gradient


def random_batch(
    spec: LayerSpec, loss: Loss, batch_size: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Spec-appropriate random (input, target) pair for checking gradients."""
    _, out_w = validate(spec)
    x = _random_input(spec, batch_size, rng)
    if loss is Loss.MSE:
        target = rng.uniform(-1.0, 1.0, (batch_size, out_w))
    else:
        target = rng.integers(0, 2, (batch_size, out_w)).astype(np.float64)
    return x, target


def _random_input(spec: LayerSpec, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(spec, Linear):
        return rng.uniform(-1.0, 1.0, (batch_size, spec.in_dim))
    if isinstance(spec, Embedding):
        return rng.integers(0, spec.vocab_size, (batch_size, 1)).astype(np.int64)
    if isinstance(spec, Concat):
        cols = [_random_input(p, batch_size, rng) for p in spec.parts]
        if all(np.issubdtype(c.dtype, np.integer) for c in cols):
            return np.hstack(cols)
        return np.hstack([c.astype(np.float64) for c in cols])
    if isinstance(spec, Sequential):
        return _random_input(spec.layers[0], batch_size, rng)
    raise SpecError(f"cannot build an input for {spec!r}")


def gradient_check(
    spec: LayerSpec,
    loss: Loss,
    seed: int,
    batch_size: int = 8,
    step: float = 1e-5,
    grad_fn=None,
) -> float:
    """Max relative error of the analytic gradient vs central differences.

    The denominator is max(|analytic|, |numeric|, 1e-8) per coordinate.
    ``grad_fn`` overrides the analytic route, only so tests can verify the
    checker catches a corrupted backward.
    """
    total = param_count(spec)
    if total > 10_000:
        raise ValueError(f"gradient check capped at 10k parameters, spec has {total}")
    replica = ModelReplica(spec, init_params(spec, seed))
    x, target = random_batch(spec, loss, batch_size, keyed_rng("grad-check", seed))
    if grad_fn is None:
        _, analytic = replica.backward(x, target, loss)
    else:
        analytic = grad_fn(replica, x, target, loss)

    params = replica.params
    worst = 0.0
    for j in range(total):
        saved = params[j]
        params[j] = saved + step
        f_plus = loss_value(loss, replica.forward(x), target)
        params[j] = saved - step
        f_minus = loss_value(loss, replica.forward(x), target)
        params[j] = saved
        numeric = (f_plus - f_minus) / (2.0 * step)
        denom = max(abs(analytic[j]), abs(numeric), 1e-8)
        worst = max(worst, abs(analytic[j] - numeric) / denom)
    return worst
