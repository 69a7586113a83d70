"""Synthetic toy workloads, fully generated from a seed.

xor_mlp: a 2-8-1 sigmoid MLP on noisy XOR points (MSE).
lin_reg: one linear layer recovering planted noiseless weights (MSE).
toy_ncf: user/item embeddings into a small MLP tower on implicit-feedback
triples with planted low-rank structure (BCE).

Loss thresholds in the shipped configs were established by running the
sequential reference on these exact generators; see the configs directory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .nn.layers import Concat, Embedding, LayerSpec, Linear, ReLU, Sequential, Sigmoid
from .nn.losses import Loss
from .rng import keyed_rng

Sample = tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class Workload:
    name: str
    model_spec: LayerSpec
    loss: Loss
    make_samples: Callable[[int], list[Sample]]


def _xor_samples(seed: int) -> list[Sample]:
    rng = keyed_rng("workload-xor", seed)
    bits = rng.integers(0, 2, (256, 2))
    x = bits.astype(np.float64) + rng.uniform(-0.1, 0.1, (256, 2))
    y = (bits[:, 0] ^ bits[:, 1]).astype(np.float64)
    return [(x[i], y[i : i + 1]) for i in range(256)]


def _lin_reg_planted(seed: int) -> np.ndarray:
    """Planted flat parameter vector in Linear(8, 1) layout: weights, bias."""
    rng = keyed_rng("workload-linreg-planted", seed)
    return rng.uniform(-1.0, 1.0, 9)


def _lin_reg_samples(seed: int) -> list[Sample]:
    planted = _lin_reg_planted(seed)
    w, b = planted[:8], planted[8]
    rng = keyed_rng("workload-linreg", seed)
    x = rng.uniform(-1.0, 1.0, (512, 8))
    y = x @ w + b  # noiseless: the planted weights are the exact optimum
    return [(x[i], y[i : i + 1]) for i in range(512)]


NCF_USERS = 32
NCF_ITEMS = 48


def _ncf_samples(seed: int) -> list[Sample]:
    rng = keyed_rng("workload-ncf", seed)
    latent_users = rng.uniform(-1.0, 1.0, (NCF_USERS, 4))
    latent_items = rng.uniform(-1.0, 1.0, (NCF_ITEMS, 4))
    users = rng.integers(0, NCF_USERS, 2048)
    items = rng.integers(0, NCF_ITEMS, 2048)
    score = np.sum(latent_users[users] * latent_items[items], axis=1)
    labels = (score > 0.0).astype(np.float64)
    x = np.stack([users, items], axis=1).astype(np.int64)
    return [(x[i], labels[i : i + 1]) for i in range(2048)]


WORKLOADS: dict[str, Workload] = {
    "xor_mlp": Workload(
        name="xor_mlp",
        model_spec=Sequential([Linear(2, 8), Sigmoid(), Linear(8, 1), Sigmoid()]),
        loss=Loss.MSE,
        make_samples=_xor_samples,
    ),
    "lin_reg": Workload(
        name="lin_reg",
        model_spec=Linear(8, 1),
        loss=Loss.MSE,
        make_samples=_lin_reg_samples,
    ),
    "toy_ncf": Workload(
        name="toy_ncf",
        model_spec=Sequential(
            [
                Concat([Embedding(NCF_USERS, 8), Embedding(NCF_ITEMS, 8)]),
                Linear(16, 16),
                ReLU(),
                Linear(16, 1),
                Sigmoid(),
            ]
        ),
        loss=Loss.BCE,
        make_samples=_ncf_samples,
    ),
}


def get_workload(name: str) -> Workload:
    try:
        return WORKLOADS[name]
    except KeyError:
        raise KeyError(f"unknown workload {name!r}; choose from {sorted(WORKLOADS)}") from None


def lin_reg_planted_params(seed: int) -> np.ndarray:
    return _lin_reg_planted(seed)


def dummy_comm_workload(total_params: int) -> Workload:
    """Single linear layer with exactly ``total_params`` parameters, used
    to measure communication volume for a chosen K."""
    if total_params < 2:
        raise ValueError("need at least 2 parameters (one weight plus bias)")
    in_dim = total_params - 1

    def make_samples(seed: int) -> list[Sample]:
        rng = keyed_rng("workload-comm", seed, total_params)
        x = rng.uniform(-1.0, 1.0, (32, in_dim))
        y = rng.uniform(-1.0, 1.0, (32, 1))
        return [(x[i], y[i]) for i in range(32)]

    return Workload(
        name=f"comm_{total_params}",
        model_spec=Linear(in_dim, 1),
        loss=Loss.MSE,
        make_samples=make_samples,
    )
