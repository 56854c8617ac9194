"""Measurement suite: spike spectra, 70%-power critical frequency, ENWSI,
spiking-activity percentage, event-driven synaptic-op counting, and
accuracy/SSE evaluation under the noise scenarios.

Op-counting convention: every spike (input-layer spikes included) engages the
weights of the next weighted layer downstream, looking through weightless
average pools by halving its spatial coordinates; pools themselves add zero
ops. Conv fan-out is boundary-adjusted (4, 6 or 9 kernel positions times the
output channel count); dense fan-out is the full output width.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from snnlab.coherence import SpectrumCurve
from snnlab.encoding import NoiseSpec, SpikeTensor, encode_noisy, normalize
from snnlab.network import CONV, FC, OUTPUT, POOL, ForwardTrace, NetworkState, \
    forward_batch


@dataclass
class RunMetrics:
    """One evaluation run. sse_train or sse_test is filled according to the
    dataset's split tag; the other stays NaN. synaptic_ops is the exact
    integer total over all samples and seeds."""

    accuracy: float = float("nan")
    sse_train: float = float("nan")
    sse_test: float = float("nan")
    spike_activity: float = float("nan")
    synaptic_ops: int = 0
    enwsi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    critical_freq: float = float("nan")

    @property
    def sse(self) -> float:
        return self.sse_train if not np.isnan(self.sse_train) else self.sse_test


def spike_spectrum(spikes) -> SpectrumCurve:
    """Single-sided DFT magnitude of a time-major spike (or potential) array.

    Magnitudes are averaged over all non-time axes; frequencies are k/T for
    bins k = 0..T//2.
    """
    vals = spikes.values if isinstance(spikes, SpikeTensor) else np.asarray(spikes, dtype=np.float64)
    T = vals.shape[0]
    if T < 2:
        raise ValueError("need at least 2 time-steps")
    mag = np.abs(np.fft.rfft(vals, axis=0))
    if mag.ndim > 1:
        mag = mag.mean(axis=tuple(range(1, mag.ndim)))
    freqs = np.arange(mag.shape[0]) / T
    return SpectrumCurve(frequencies=freqs, values=mag)


def critical_frequency(spectrum: SpectrumCurve, fraction: float = 0.7) -> float:
    """Smallest frequency below which `fraction` of the total power lies.

    Power is the squared magnitude per bin; cumulative power is compared
    against fraction * total.
    """
    power = np.abs(np.asarray(spectrum.values, dtype=np.float64)) ** 2
    total = power.sum()
    if total <= 0:
        raise ValueError("zero total power")
    cum = np.cumsum(power)
    i = int(np.searchsorted(cum, fraction * total - 1e-12 * total))
    return float(spectrum.frequencies[min(i, len(power) - 1)])


def _weighted_hidden_layers(net: NetworkState):
    return [l for l, s in enumerate(net.specs[:-1]) if s.kind != POOL]


def enwsi(trace: ForwardTrace, net: NetworkState) -> np.ndarray:
    """Euclidean norm of each weighted hidden layer's weighted-sum inputs,
    taken over every unit, time-step and trace sample."""
    out = []
    for l in _weighted_hidden_layers(net):
        out.append(float(np.sqrt(np.sum(trace.weighted[l] ** 2))))
    return np.array(out)


def _conv_cover(n: int) -> np.ndarray:
    """How many 3x3 kernel placements (stride 1, pad 1) cover each position."""
    c = np.full(n, 3, dtype=np.int64)
    c[0] -= 1
    c[-1] -= 1
    if n == 1:
        c[:] = 1
    return c


def fanout_map(net: NetworkState, emitter_shape: tuple, first_layer: int) -> np.ndarray:
    """Per-unit weight engagements for spikes emitted into layer first_layer.

    Walks through any pools (halving spatial coordinates) to the next
    weighted layer; zero if none exists.
    """
    shape = tuple(emitter_shape)
    j = first_layer
    while j < len(net.specs) and net.specs[j].kind == POOL:
        c, h, w = shape
        shape = (c, h // 2, w // 2)
        j += 1
    if j >= len(net.specs):
        return np.zeros(emitter_shape, dtype=np.int64)
    target = net.specs[j]
    if target.kind == CONV:
        c, h, w = shape
        o = target.out_shape[0]
        cover = np.multiply.outer(_conv_cover(h), _conv_cover(w)) * o
        pooled_map = np.broadcast_to(cover, (c, h, w))
    else:
        pooled_map = np.full(shape, target.out_shape[0], dtype=np.int64)
    # expand back through the pools so the map indexes emitter coordinates
    for _ in range(j - first_layer):
        pooled_map = np.repeat(np.repeat(pooled_map, 2, axis=-2), 2, axis=-1)
    return np.ascontiguousarray(pooled_map)


def count_synaptic_ops(trace: ForwardTrace, net: NetworkState) -> int:
    """Exact event-driven synaptic-operation total for a trace.

    Input-layer events (nonzero encoded values) count toward the first
    weighted layer; each hidden spike counts the fan-out of the next weighted
    layer downstream.
    """
    total = 0
    fmap = fanout_map(net, net.specs[0].in_shape, 0)
    total += int(((trace.inputs != 0) * fmap).sum())
    for l, s in enumerate(net.specs[:-1]):
        if s.kind == POOL:
            continue
        fmap = fanout_map(net, s.out_shape, l + 1)
        total += int(((trace.outputs[l] != 0) * fmap).sum())
    return total


def _per_sample_ops(trace: ForwardTrace, net: NetworkState) -> np.ndarray:
    axes_in = tuple(range(1, trace.inputs.ndim))
    fmap = fanout_map(net, net.specs[0].in_shape, 0)
    ops = ((trace.inputs != 0) * fmap).sum(axis=axes_in)
    for l, s in enumerate(net.specs[:-1]):
        if s.kind == POOL:
            continue
        fmap = fanout_map(net, s.out_shape, l + 1)
        arr = trace.outputs[l]
        ops = ops + ((arr != 0) * fmap).sum(axis=tuple(range(1, arr.ndim)))
    return ops.astype(np.int64)


def _hidden_spike_stats(trace: ForwardTrace, net: NetworkState):
    """(per-sample spike fraction, per-sample enwsi rows)."""
    spikes = 0.0
    units = 0
    norms = []
    for l, s in enumerate(net.specs[:-1]):
        if s.kind == POOL:
            continue
        arr = trace.outputs[l]
        spikes = spikes + arr.sum(axis=tuple(range(1, arr.ndim)))
        units += int(np.prod(s.out_shape))
        w = trace.weighted[l]
        norms.append(np.sqrt((w ** 2).sum(axis=tuple(range(1, w.ndim)))))
    frac = spikes / (units * trace.T) if units else np.zeros(trace.n_samples)
    return frac, np.stack(norms, axis=1) if norms else np.zeros((trace.n_samples, 0))


def evaluate(net: NetworkState, dataset, noise: NoiseSpec, T: int,
             seeds, chunk: int = 32) -> RunMetrics:
    """Forward-evaluate every sample under the given noise spec.

    Each (seed, sample) pair owns the rng stream default_rng([seed, index]),
    so results do not depend on batching or evaluation order. Accuracy, SSE,
    activity, ENWSI and the target-neuron critical frequency average over
    seeds; synaptic ops accumulate exactly.
    """
    images = np.moveaxis(np.stack([normalize(img) for img in dataset.images]), -1, 1)
    labels = np.asarray(dataset.labels, dtype=int)
    n = images.shape[0]
    n_classes = net.specs[-1].out_shape[0]
    onehot = np.eye(n_classes)[labels]
    accs, sses, acts, cfreqs = [], [], [], []
    enwsis = []
    ops_total = 0
    for seed in seeds:
        correct = 0
        sse = 0.0
        act_rows, cf_rows, en_rows = [], [], []
        for start in range(0, n, chunk):
            idxs = range(start, min(start + chunk, n))
            enc = np.stack([
                encode_noisy(images[i], T,
                             noise, np.random.default_rng([int(seed), int(i)])).values
                for i in idxs])
            preds, trace = forward_batch(net, enc)
            correct += int((preds.argmax(axis=1) == labels[start:start + chunk][:len(preds)]).sum())
            sse += float(((preds - onehot[list(idxs)]) ** 2).sum())
            ops_total += int(_per_sample_ops(trace, net).sum())
            frac, en = _hidden_spike_stats(trace, net)
            act_rows.append(frac)
            en_rows.append(en)
            for b, i in enumerate(idxs):
                # fluctuation spectrum of the target neuron's drive: the DC
                # part only reflects the mean rate, so it is removed before
                # asking where the power concentrates
                sig = trace.weighted[-1][b, :, labels[i]]
                sig = sig - sig.mean()
                if np.abs(sig).sum() == 0:
                    cf_rows.append(np.nan)
                else:
                    cf_rows.append(critical_frequency(spike_spectrum(sig)))
        accs.append(correct / n)
        sses.append(sse)
        acts.append(float(np.concatenate(act_rows).mean()))
        valid_cf = [c for c in cf_rows if not np.isnan(c)]
        cfreqs.append(float(np.mean(valid_cf)) if valid_cf else float("nan"))
        enwsis.append(np.concatenate(en_rows).mean(axis=0))
    valid_seed_cf = [c for c in cfreqs if not np.isnan(c)]
    m = RunMetrics(
        accuracy=float(np.mean(accs)),
        spike_activity=float(np.mean(acts)),
        synaptic_ops=ops_total,
        enwsi=np.mean(enwsis, axis=0),
        critical_freq=float(np.mean(valid_seed_cf)) if valid_seed_cf else float("nan"))
    if getattr(dataset, "split", "test") == "train":
        m.sse_train = float(np.mean(sses))
    else:
        m.sse_test = float(np.mean(sses))
    return m
