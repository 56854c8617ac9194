"""Bit-exact binary network checkpoints.

Little-endian layout:

    4s   magic b"SNNC"
    H    format version (1)
    H    architecture string length, then that many utf-8 bytes
    4d   tau_m, v_th, u_rest, epsilon   (tau_m may be +inf)
    H    number of layers
    per layer:
    B    kind code (0 conv, 1 pool, 2 fc, 3 output)
    B    len(in_shape), then that many I
    B    len(out_shape), then that many I
    B    1 if weights follow else 0
    B    weight ndim, then that many I dims, then float64 data
"""

from __future__ import annotations

import math
import struct

import numpy as np

from snnlab.network import CONV, FC, OUTPUT, POOL, LayerSpec, NetworkState
from snnlab.neuron import NeuronConfig

MAGIC = b"SNNC"
VERSION = 1
_KIND_CODE = {CONV: 0, POOL: 1, FC: 2, OUTPUT: 3}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


class CheckpointError(ValueError):
    pass


def save_checkpoint(net: NetworkState, path) -> None:
    parts = [MAGIC, struct.pack("<H", VERSION)]
    arch = net.architecture.encode("utf-8")
    parts.append(struct.pack("<H", len(arch)))
    parts.append(arch)
    c = net.ncfg
    parts.append(struct.pack("<4d", c.tau_m, c.v_th, c.u_rest, c.epsilon))
    parts.append(struct.pack("<H", len(net.specs)))
    for s in net.specs:
        parts.append(struct.pack("<BB", _KIND_CODE[s.kind], len(s.in_shape)))
        parts.append(struct.pack(f"<{len(s.in_shape)}I", *s.in_shape))
        parts.append(struct.pack("<B", len(s.out_shape)))
        parts.append(struct.pack(f"<{len(s.out_shape)}I", *s.out_shape))
        if s.weights is None:
            parts.append(struct.pack("<B", 0))
        else:
            w = np.ascontiguousarray(s.weights, dtype="<f8")
            parts.append(struct.pack("<BB", 1, w.ndim))
            parts.append(struct.pack(f"<{w.ndim}I", *w.shape))
            parts.append(w.tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


class _Reader:
    def __init__(self, data, path):
        self.data = data
        self.off = 0
        self.path = path

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.off + size > len(self.data):
            raise CheckpointError(f"{self.path}: truncated at offset {self.off}")
        out = struct.unpack_from(fmt, self.data, self.off)
        self.off += size
        return out

    def raw(self, size):
        if self.off + size > len(self.data):
            raise CheckpointError(f"{self.path}: truncated at offset {self.off}")
        out = self.data[self.off:self.off + size]
        self.off += size
        return out


def load_checkpoint(path) -> NetworkState:
    with open(path, "rb") as f:
        data = f.read()
    r = _Reader(data, path)
    if r.raw(4) != MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    (version,) = r.take("<H")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    (alen,) = r.take("<H")
    arch = r.raw(alen).decode("utf-8")
    tau_m, v_th, u_rest, epsilon = r.take("<4d")
    ncfg = NeuronConfig(tau_m=tau_m, v_th=v_th, u_rest=u_rest, epsilon=epsilon)
    (n_layers,) = r.take("<H")
    specs = []
    for _ in range(n_layers):
        code, nin = r.take("<BB")
        in_shape = r.take(f"<{nin}I")
        (nout,) = r.take("<B")
        out_shape = r.take(f"<{nout}I")
        (has_w,) = r.take("<B")
        weights = None
        if has_w:
            (ndim,) = r.take("<B")
            wshape = r.take(f"<{ndim}I")
            count = int(np.prod(wshape))
            weights = np.frombuffer(r.raw(8 * count), dtype="<f8").reshape(wshape).copy()
        if code not in _CODE_KIND:
            raise CheckpointError(f"{path}: unknown layer code {code}")
        specs.append(LayerSpec(_CODE_KIND[code], tuple(in_shape), tuple(out_shape), weights))
    if r.off != len(data):
        raise CheckpointError(f"{path}: {len(data) - r.off} trailing bytes")
    return NetworkState(specs=specs, ncfg=ncfg, architecture=arch)
