"""Layered SNN forward pass over T time-steps.

Layers: 3x3 convolutions (stride 1, zero padding 1, spatial-size preserving),
2x2 non-overlapping average pools (weightless, real-valued outputs), fully
connected layers, and a single non-spiking output layer that accumulates its
decayed potential. Hidden conv/FC layers spike via the neuron module.

Architecture strings look like "16x16-8C3-2P-64FC-2o" (a unicode
multiplication sign works too): input height x width (x channels optional),
then <n>C3 conv, 2P pool, <n>FC, and a final <n>o output. The historical "2s"
token parses as a pool.

Arrays in ForwardTrace always carry a leading batch axis; the public
per-sample forward() wraps a batch of one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from snnlab.encoding import SpikeTensor
from snnlab.neuron import (LayerState, NeuronConfig, accumulate_output_step,
                           decay_factor, integrate_step)

CONV = "conv3x3"
POOL = "avgpool2x2"
FC = "fc"
OUTPUT = "output"


@dataclass
class LayerSpec:
    kind: str
    in_shape: tuple
    out_shape: tuple
    weights: np.ndarray | None = None

    @property
    def n_out(self) -> int:
        return int(np.prod(self.out_shape))


@dataclass
class NetworkState:
    specs: list
    ncfg: NeuronConfig
    architecture: str = ""

    @property
    def output_spec(self) -> LayerSpec:
        return self.specs[-1]


@dataclass
class ForwardTrace:
    """Everything the backward pass and the measurement suite need.

    All arrays have shape (B, T, ...). outputs[l] holds layer l's per-step
    output (0/1 spikes for conv/FC, pooled reals for pools, None for the
    output layer). weighted[l] is the pre-membrane weighted input W_l.x of
    weighted layers (None for pools). potentials[l] is the pre-reset membrane
    potential of spiking layers. out_history is the output-layer potential
    including the zero initial state, shape (B, T+1, n_out).
    """

    T: int
    inputs: np.ndarray
    outputs: list
    weighted: list
    potentials: list
    out_history: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]


_INPUT_RE = re.compile(r"^(\d+)[x×](\d+)(?:[x×](\d+))?$")
_CONV_RE = re.compile(r"^(\d+)C3$")
_POOL_RE = re.compile(r"^2[PpSs]$")
_FC_RE = re.compile(r"^(\d+)FC$")
_OUT_RE = re.compile(r"^(\d+)o$")


def parse_architecture(arch: str) -> list:
    """Parse an architecture string into shape-resolved LayerSpecs (no weights)."""
    tokens = [t for t in arch.strip().split("-") if t]
    if len(tokens) < 2:
        raise ValueError(f"architecture needs an input token and an output layer: {arch!r}")
    m = _INPUT_RE.match(tokens[0])
    if not m:
        raise ValueError(f"bad input token {tokens[0]!r} in {arch!r}")
    h, w = int(m.group(1)), int(m.group(2))
    c = int(m.group(3)) if m.group(3) else 1
    shape: tuple = (c, h, w)
    specs = []
    for tok in tokens[1:]:
        if (m := _CONV_RE.match(tok)):
            if len(shape) != 3:
                raise ValueError(f"conv after flatten in {arch!r}")
            out_shape = (int(m.group(1)), shape[1], shape[2])
            specs.append(LayerSpec(CONV, shape, out_shape))
        elif _POOL_RE.match(tok):
            if len(shape) != 3:
                raise ValueError(f"pool after flatten in {arch!r}")
            cc, hh, ww = shape
            if hh % 2 or ww % 2:
                raise ValueError(f"pool needs even spatial dims, got {shape} in {arch!r}")
            out_shape = (cc, hh // 2, ww // 2)
            specs.append(LayerSpec(POOL, shape, out_shape))
        elif (m := _FC_RE.match(tok)):
            specs.append(LayerSpec(FC, shape, (int(m.group(1)),)))
        elif (m := _OUT_RE.match(tok)):
            specs.append(LayerSpec(OUTPUT, shape, (int(m.group(1)),)))
        else:
            raise ValueError(f"unknown token {tok!r} in {arch!r}")
        shape = specs[-1].out_shape
    if specs[-1].kind != OUTPUT:
        raise ValueError(f"architecture must end in an output layer: {arch!r}")
    if any(s.kind == OUTPUT for s in specs[:-1]):
        raise ValueError(f"only the last layer may be the output: {arch!r}")
    return specs


def _fan_in(spec: LayerSpec) -> int:
    if spec.kind == CONV:
        return spec.in_shape[0] * 9
    return int(np.prod(spec.in_shape))


def build_network(specs, cfg: NeuronConfig, init_seed: int) -> NetworkState:
    """Initialize weights (zero-mean uniform, scale 1/sqrt(fan-in), seeded).

    Accepts a parsed LayerSpec list or an architecture string.
    """
    arch = ""
    if isinstance(specs, str):
        arch = specs
        specs = parse_architecture(specs)
    if not specs:
        raise ValueError("empty layer list")
    if specs[-1].kind != OUTPUT:
        raise ValueError("last layer must be the output layer")
    for a, b in zip(specs[:-1], specs[1:]):
        if int(np.prod(a.out_shape)) != int(np.prod(b.in_shape)):
            raise ValueError(f"shape chain breaks between {a.out_shape} and {b.in_shape}")
    rng = np.random.default_rng(init_seed)
    out = []
    for s in specs:
        if s.kind == POOL:
            out.append(LayerSpec(s.kind, s.in_shape, s.out_shape, None))
            continue
        scale = 1.0 / np.sqrt(_fan_in(s))
        if s.kind == CONV:
            wshape = (s.out_shape[0], s.in_shape[0], 3, 3)
        else:
            wshape = (s.out_shape[0], int(np.prod(s.in_shape)))
        out.append(LayerSpec(s.kind, s.in_shape, s.out_shape,
                             rng.uniform(-scale, scale, wshape)))
    return NetworkState(specs=out, ncfg=cfg, architecture=arch)


def _conv_windows(x: np.ndarray) -> np.ndarray:
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    return sliding_window_view(xp, (3, 3), axis=(2, 3))


def _apply_batch(spec: LayerSpec, x: np.ndarray) -> np.ndarray:
    """Weighted input of one layer for a batch (B, *in_shape)."""
    if spec.kind == CONV:
        return np.einsum("bchwuv,ocuv->bohw", _conv_windows(x), spec.weights,
                         optimize=True)
    if spec.kind == POOL:
        b, c, h, w = x.shape
        return x.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
    return x.reshape(x.shape[0], -1) @ spec.weights.T


def layer_apply(layer: LayerSpec, spikes_in: np.ndarray) -> np.ndarray:
    """Single-sample weighted input (conv correlation, pool mean, or dense)."""
    x = np.asarray(spikes_in, dtype=np.float64)
    if x.shape != tuple(layer.in_shape):
        raise ValueError(f"input shape {x.shape} does not match layer {layer.in_shape}")
    return _apply_batch(layer, x[None])[0]


def forward_batch(net: NetworkState, values: np.ndarray) -> tuple[np.ndarray, ForwardTrace]:
    """Run the T-step dynamics for a batch; values has shape (B, T, *in_shape)."""
    specs = net.specs
    cfg = net.ncfg
    B, T = values.shape[0], values.shape[1]
    if tuple(values.shape[2:]) != tuple(specs[0].in_shape):
        raise ValueError(f"input shape {values.shape[2:]} vs network {specs[0].in_shape}")
    n_layers = len(specs)
    outputs = [None] * n_layers
    weighted = [None] * n_layers
    potentials = [None] * n_layers
    states = [None] * n_layers
    for l, s in enumerate(specs[:-1]):
        outputs[l] = np.zeros((B, T) + tuple(s.out_shape))
        if s.kind != POOL:
            weighted[l] = np.zeros((B, T) + tuple(s.out_shape))
            potentials[l] = np.zeros((B, T) + tuple(s.out_shape))
            states[l] = LayerState(u=np.zeros((B,) + tuple(s.out_shape)))
    n_out = specs[-1].out_shape[0]
    weighted[-1] = np.zeros((B, T, n_out))
    out_history = np.zeros((B, T + 1, n_out))
    out_state = LayerState(u=np.zeros((B, n_out)))
    for t in range(T):
        x = values[:, t]
        for l, s in enumerate(specs[:-1]):
            if s.kind == POOL:
                x = _apply_batch(s, x)
                outputs[l][:, t] = x
                continue
            w_in = _apply_batch(s, x)
            weighted[l][:, t] = w_in
            potentials[l][:, t] = states[l].u + w_in
            spikes, states[l] = integrate_step(states[l], w_in, cfg)
            outputs[l][:, t] = spikes
            x = spikes
        w_in = _apply_batch(specs[-1], x)
        weighted[-1][:, t] = w_in
        out_state = accumulate_output_step(out_state, w_in, cfg)
        out_history[:, t + 1] = out_state.u
    pred = out_state.u / T
    trace = ForwardTrace(T=T, inputs=values, outputs=outputs, weighted=weighted,
                         potentials=potentials, out_history=out_history)
    return pred, trace


def forward(net: NetworkState, input, T: int | None = None):
    """Per-sample forward pass.

    input is a SpikeTensor or a (T, *in_shape) array. Returns the prediction
    U_L[T]/T as a vector and a ForwardTrace (batch axis of one).
    """
    vals = input.values if isinstance(input, SpikeTensor) else np.asarray(input, dtype=np.float64)
    if T is not None and vals.shape[0] != T:
        raise ValueError(f"input has {vals.shape[0]} steps, expected {T}")
    pred, trace = forward_batch(net, vals[None])
    return pred[0], trace
