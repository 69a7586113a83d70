"""Layer specifications for flat-parameter models.

A model is described by an immutable spec tree; its parameters live in a
single flat float64 vector whose layout is fixed by the spec alone
(traversal order, row-major within each layer).  Concat runs its parts
side by side on consecutive input columns and concatenates their outputs,
which is how an embedding pair feeds an MLP tower.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterator, Union


class SpecError(ValueError):
    """Malformed or shape-incompatible layer specification."""


@dataclass(frozen=True)
class Linear:
    in_dim: int
    out_dim: int

    def __post_init__(self) -> None:
        if self.in_dim < 1 or self.out_dim < 1:
            raise SpecError("Linear dimensions must be positive")


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class Sigmoid:
    pass


@dataclass(frozen=True)
class Embedding:
    """Lookup table over integer ids; consumes one input column."""

    vocab_size: int
    embed_dim: int

    def __post_init__(self) -> None:
        if self.vocab_size < 1 or self.embed_dim < 1:
            raise SpecError("Embedding dimensions must be positive")


@dataclass(frozen=True)
class Concat:
    parts: tuple

    def __init__(self, parts) -> None:
        object.__setattr__(self, "parts", tuple(parts))
        if not self.parts:
            raise SpecError("Concat needs at least one part")


@dataclass(frozen=True)
class Sequential:
    layers: tuple

    def __init__(self, layers) -> None:
        object.__setattr__(self, "layers", tuple(layers))
        if not self.layers:
            raise SpecError("Sequential needs at least one layer")


LayerSpec = Union[Linear, ReLU, Sigmoid, Embedding, Concat, Sequential]


def param_count(spec: LayerSpec) -> int:
    if isinstance(spec, Linear):
        return spec.in_dim * spec.out_dim + spec.out_dim
    if isinstance(spec, Embedding):
        return spec.vocab_size * spec.embed_dim
    if isinstance(spec, (ReLU, Sigmoid)):
        return 0
    if isinstance(spec, Concat):
        return sum(param_count(p) for p in spec.parts)
    if isinstance(spec, Sequential):
        return sum(param_count(l) for l in spec.layers)
    raise SpecError(f"unknown spec {spec!r}")


def iter_param_layers(spec: LayerSpec) -> Iterator[Union[Linear, Embedding]]:
    """Parametric layers in traversal (= parameter layout) order."""
    if isinstance(spec, (Linear, Embedding)):
        yield spec
    elif isinstance(spec, Concat):
        for part in spec.parts:
            yield from iter_param_layers(part)
    elif isinstance(spec, Sequential):
        for layer in spec.layers:
            yield from iter_param_layers(layer)


def input_width(spec: LayerSpec) -> int | None:
    """Number of input columns the spec consumes; None if shape-agnostic."""
    if isinstance(spec, Linear):
        return spec.in_dim
    if isinstance(spec, Embedding):
        return 1
    if isinstance(spec, (ReLU, Sigmoid)):
        return None
    if isinstance(spec, Concat):
        widths = [input_width(p) for p in spec.parts]
        if any(w is None for w in widths):
            raise SpecError("every Concat part must have a defined input width")
        return sum(widths)
    if isinstance(spec, Sequential):
        return input_width(spec.layers[0])
    raise SpecError(f"unknown spec {spec!r}")


def output_width(spec: LayerSpec, in_width: int) -> int:
    """Output column count given ``in_width``; raises on incompatibility."""
    if isinstance(spec, Linear):
        if in_width != spec.in_dim:
            raise SpecError(f"Linear expects {spec.in_dim} inputs, got {in_width}")
        return spec.out_dim
    if isinstance(spec, Embedding):
        if in_width != 1:
            raise SpecError("Embedding consumes exactly one id column")
        return spec.embed_dim
    if isinstance(spec, (ReLU, Sigmoid)):
        return in_width
    if isinstance(spec, Concat):
        widths = [input_width(p) for p in spec.parts]
        if sum(widths) != in_width:
            raise SpecError(
                f"Concat consumes {sum(widths)} columns, got {in_width}"
            )
        return sum(output_width(p, w) for p, w in zip(spec.parts, widths))
    if isinstance(spec, Sequential):
        width = in_width
        for layer in spec.layers:
            width = output_width(layer, width)
        return width
    raise SpecError(f"unknown spec {spec!r}")


def validate(spec: LayerSpec) -> tuple[int, int]:
    """Check internal shape compatibility; return (in_width, out_width)."""
    in_width = input_width(spec)
    if in_width is None:
        raise SpecError("model input width is undetermined (leading activation?)")
    return in_width, output_width(spec, in_width)


def spec_fingerprint(spec: LayerSpec) -> str:
    """Short stable id of a spec tree, for content-derived transform ids."""
    return hashlib.sha256(repr(spec).encode()).hexdigest()[:12]
