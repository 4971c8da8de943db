"""Theoretical and effective receptive fields of a backbone's stage outputs.

The effective receptive field is modelled without weights: each layer spreads
an output unit's sensitivity uniformly over its kernel taps, so the input
profile is the convolution of every layer's tap distribution, mapped to input
pixels through the cumulative stride.  Profiles are 1-D; the 2-D profile is
their outer product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .arch import DILATIONS, Architecture


@dataclass(frozen=True)
class Layer:
    kernel: int
    stride: int = 1
    dilation: int = 1

    def __post_init__(self):
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError(f"kernel must be odd and positive, got {self.kernel}")
        if self.stride < 1 or self.dilation < 1:
            raise ValueError("stride and dilation must be >= 1")


LayerChain = tuple[Layer, ...]


def _block_layers(kind: str, stride: int, dilation: int) -> list[Layer]:
    if kind == "basic":
        # only the second 3x3 is searched
        return [Layer(3, stride, 1), Layer(3, 1, dilation)]
    if kind in ("bottleneck", "grouped_bottleneck"):
        return [Layer(1), Layer(3, stride, dilation), Layer(1)]
    if kind == "inverted_residual":
        return [Layer(1), Layer(3, stride, dilation), Layer(1)]
    raise ValueError(f"unknown block kind {kind!r}")


def arch_to_layer_chain(arch: Architecture, up_to_stage: int | None = None) -> LayerChain:
    """Expand ``arch`` into its main-path conv layers up to a stage output.

    ``up_to_stage=0`` gives the stem alone; the default is the last searchable
    stage.  Shortcut branches are ignored (they never widen the field).  An
    empty operation code means all blocks use dilation 1.
    """
    family = arch.family
    if up_to_stage is None:
        up_to_stage = family.num_stages
    if not 0 <= up_to_stage <= family.num_stages:
        raise ValueError(f"up_to_stage must lie in 0..{family.num_stages}")
    ops = arch.op_code or (0,) * arch.num_blocks
    dil = [DILATIONS[o] for o in ops]

    layers: list[Layer] = []
    block = 0
    if family.block_kind == "inverted_residual":
        # fixed prefix: 3x3/2 stem conv, then one stride-1 inverted residual
        layers.append(Layer(3, 2, dil[0]))
        block = 1
        for _ in range(1, family.fixed_prefix_blocks):
            layers += _block_layers(family.block_kind, 1, dil[block])
            block += 1
    else:
        layers += [Layer(7, 2, 1), Layer(3, 2, 1)]  # stem conv + max pool
        for _ in range(family.fixed_prefix_blocks):
            layers += _block_layers(family.block_kind, 1, dil[block])
            block += 1

    for stage in range(up_to_stage):
        for j in range(arch.stage_code[stage]):
            stride = family.stage_strides[stage] if j == 0 else 1
            layers += _block_layers(family.block_kind, stride, dil[block])
            block += 1
    return tuple(layers)


def theoretical_rf(chain: Sequence[Layer]) -> int:
    r, jump = 1, 1
    for layer in chain:
        r += (layer.kernel - 1) * layer.dilation * jump
        jump *= layer.stride
    return r


def spread_variance(chain: Sequence[Layer]) -> float:
    """Closed-form variance of the tap-spread model, summed layer by layer."""
    var, jump = 0.0, 1
    for layer in chain:
        step = layer.dilation * jump
        var += step * step * (layer.kernel ** 2 - 1) / 12.0
        jump *= layer.stride
    return var


@dataclass(frozen=True)
class ErfProfile:
    profile: np.ndarray  # length == support, centred
    effective_radius: float

    @property
    def support(self) -> int:
        return len(self.profile)


def erf_profile(chain: Sequence[Layer], support: int | None = None) -> ErfProfile:
    trf = theoretical_rf(chain)
    if support is None:
        support = trf
    if support % 2 == 0:
        raise ValueError(f"support must be odd, got {support}")
    if support < trf:
        raise ValueError(f"support {support} smaller than theoretical RF {trf}")

    centre = support // 2
    profile = np.zeros(support)
    profile[centre] = 1.0
    jump = 1
    extent = 0  # current half-width of nonzero mass
    for layer in chain:
        step = layer.dilation * jump
        half = (layer.kernel - 1) // 2
        if half:
            out = np.zeros(support)
            lo, hi = centre - extent, centre + extent + 1
            for t in range(-half, half + 1):
                shift = t * step
                out[lo + shift:hi + shift] += profile[lo:hi]
            profile = out / layer.kernel
            extent += half * step
        jump *= layer.stride

    x = np.arange(support) - centre
    mean = float(np.dot(profile, x))
    var = float(np.dot(profile, (x - mean) ** 2))
    return ErfProfile(profile, math.sqrt(var))


@dataclass(frozen=True)
class StageField:
    stage: int
    trf: int
    erf_radius: float


def stage_fields(arch: Architecture) -> list[StageField]:
    """TRF and effective radius for the stem (stage 0) and every stage output."""
    rows = []
    for stage in range(arch.family.num_stages + 1):
        chain = arch_to_layer_chain(arch, stage)
        rows.append(StageField(stage, theoretical_rf(chain), erf_profile(chain).effective_radius))
    return rows
