from .layers import Concat, Embedding, LayerSpec, Linear, ReLU, Sequential, Sigmoid, SpecError, param_count, spec_fingerprint
from .losses import Loss, NonFiniteError, loss_grad, loss_value
from .model import ModelReplica, gradient_check, init_params, random_batch, sgd_step

__all__ = [
    "Concat",
    "Embedding",
    "LayerSpec",
    "Linear",
    "Loss",
    "ModelReplica",
    "NonFiniteError",
    "ReLU",
    "Sequential",
    "Sigmoid",
    "SpecError",
    "gradient_check",
    "init_params",
    "loss_grad",
    "loss_value",
    "param_count",
    "random_batch",
    "sgd_step",
    "spec_fingerprint",
]
