"""Surrogate-gradient BPTT and mini-batch SGD.

Credit assignment runs backward through the unrolled dynamics, t = T..1 and
layers L-1..1. On a non-spiking step the membrane carry contributes a factor
d = exp(-1/tau_m); a reset truncates the carry (gradient 0 across resets).
The spike nonlinearity is replaced by surrogate_grad; the output layer's path
is exactly differentiable because it never spikes:

    dLoss/dU_L[t] = (U_L[T]/T - label)/T * d^(T-t)

Loss is half the squared error of the time-averaged output potential.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from snnlab.encoding import poisson_encode
from snnlab.network import (CONV, FC, OUTPUT, POOL, ForwardTrace, NetworkState,
                            _conv_windows, forward_batch)
from snnlab.neuron import NeuronConfig, decay_factor


class TrainingDivergence(RuntimeError):
    """Raised when the loss stops being finite (leak too aggressive, lr too hot)."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 0.05
    lr_decay_epochs: tuple = ()
    lr_decay_factor: float = 0.1
    T: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not (self.learning_rate >= 0):
            raise ValueError("learning_rate must be non-negative")


@dataclass
class GradientSet:
    """Per-layer weight gradients; None entries for weightless pools."""

    grads: list

    def __iter__(self):
        return iter(self.grads)


def compute_loss(prediction, label) -> float:
    """Half the summed squared error between prediction and one-hot label."""
    p = np.asarray(prediction, dtype=np.float64)
    y = np.asarray(label, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {y.shape}")
    return 0.5 * float(np.sum((p - y) ** 2))


def _weight_grad(spec, lam, x):
    if spec.kind == CONV:
        return np.einsum("bohw,bchwuv->ocuv", lam, _conv_windows(x), optimize=True)
    return np.einsum("bo,bi->oi", lam, x.reshape(x.shape[0], -1), optimize=True)


def _input_grad(spec, lam):
    if spec.kind == CONV:
        gp = np.pad(lam, ((0, 0), (0, 0), (1, 1), (1, 1)))
        win = np.lib.stride_tricks.sliding_window_view(gp, (3, 3), axis=(2, 3))
        wf = spec.weights[:, :, ::-1, ::-1]
        return np.einsum("bohwuv,ocuv->bchw", win, wf, optimize=True)
    g = lam @ spec.weights
    return g.reshape((lam.shape[0],) + tuple(spec.in_shape))


def _pool_backward(g):
    b, c, h, w = g.shape
    out = np.broadcast_to(g[:, :, :, None, :, None] / 4.0,
                          (b, c, h, 2, w, 2))
    return out.reshape(b, c, 2 * h, 2 * w)


def backward_batch(trace: ForwardTrace, net: NetworkState,
                   labels: np.ndarray) -> GradientSet:
    """Mean-over-batch BPTT gradients for every weighted layer.

    labels has shape (B, n_out). Iterates time T..1 with layers L-1..1 inside,
    carrying dLoss/dU between steps per the decay/reset rule.
    """
    specs = net.specs
    cfg = net.ncfg
    d = decay_factor(cfg)
    surr = 1.0 / (cfg.v_th + cfg.epsilon)
    B, T = trace.n_samples, trace.T
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape != (B, specs[-1].out_shape[0]):
        raise ValueError(f"labels shape {labels.shape} does not match trace/net")
    err = trace.out_history[:, T] / T - labels
    grads = [None if s.kind == POOL else np.zeros_like(s.weights) for s in specs]
    mu = {l: np.zeros((B,) + tuple(s.out_shape))
          for l, s in enumerate(specs[:-1]) if s.kind != POOL}

    def layer_input(l, ti):
        return trace.inputs[:, ti] if l == 0 else trace.outputs[l - 1][:, ti]

    for ti in range(T - 1, -1, -1):
        nu = err * (d ** (T - 1 - ti)) / T
        grads[-1] += _weight_grad(specs[-1], nu, layer_input(len(specs) - 1, ti))
        g = _input_grad(specs[-1], nu)
        for l in range(len(specs) - 2, -1, -1):
            s = specs[l]
            if s.kind == POOL:
                g = _pool_backward(g)
                continue
            spikes = trace.outputs[l][:, ti]
            lam = g * surr * (spikes > 0) + mu[l] * d * (1.0 - spikes)
            grads[l] += _weight_grad(s, lam, layer_input(l, ti))
            if l > 0:
                g = _input_grad(s, lam)
            mu[l] = lam
    for i, g in enumerate(grads):
        if g is not None:
            grads[i] = g / B
    return GradientSet(grads=grads)


def backward(trace: ForwardTrace, net: NetworkState, label,
             cfg: NeuronConfig | None = None) -> GradientSet:
    """Per-sample gradients; trace must come from forward on the same net."""
    if cfg is not None and cfg != net.ncfg:
        raise ValueError("cfg does not match the network's neuron config")
    label = np.asarray(label, dtype=np.float64)
    if trace.n_samples != 1:
        return backward_batch(trace, net, label)
    return backward_batch(trace, net, label[None])


def sgd_step(net: NetworkState, gset: GradientSet, lr: float) -> None:
    for spec, g in zip(net.specs, gset.grads):
        if g is not None:
            spec.weights -= lr * g


def _one_hot(labels, n_classes):
    eye = np.eye(n_classes)
    return eye[np.asarray(labels, dtype=int)]


def _encode_batch(images_norm, idxs, T, seed, epoch):
    """Fresh Poisson draws, rng stream keyed by (seed, epoch, sample index)."""
    out = np.empty((len(idxs), T) + images_norm.shape[1:])
    for j, idx in enumerate(idxs):
        rng = np.random.default_rng([seed, epoch, int(idx)])
        out[j] = poisson_encode(images_norm[idx], T, rng).values
    return out


def train(net: NetworkState, dataset, tcfg: TrainConfig, ncfg: NeuronConfig,
          test_dataset=None, eval_every: int = 1, eval_seed: int | None = None):
    """Mini-batch SGD with fresh Poisson encodings every epoch.

    dataset/test_dataset are Dataset objects (images in [0,1], integer
    labels). History holds one dict per evaluated epoch with train/test SSE
    and accuracy plus spiking statistics; training aborts with
    TrainingDivergence if the loss stops being finite. Returns (net, history);
    weights are updated in place.
    """
    from snnlab.analysis import evaluate  # deferred: analysis imports network
    from snnlab.encoding import NoiseSpec, normalize
    if ncfg != net.ncfg:
        raise ValueError("ncfg does not match the network's neuron config")
    n = dataset.images.shape[0]
    if n == 0:
        raise ValueError("empty dataset")
    # per-sample zero-mean max-abs-1 normalization, then channel-major layout
    images_norm = np.moveaxis(
        np.stack([normalize(img) for img in dataset.images]), -1, 1)
    n_classes = net.specs[-1].out_shape[0]
    onehot = _one_hot(dataset.labels, n_classes)
    lr = tcfg.learning_rate
    clean = NoiseSpec()
    seeds = [tcfg.seed if eval_seed is None else eval_seed]
    history = []
    for epoch in range(1, tcfg.epochs + 1):
        if epoch in tuple(tcfg.lr_decay_epochs):
            lr *= tcfg.lr_decay_factor
        perm = np.random.default_rng([tcfg.seed, epoch]).permutation(n)
        loss_sum = 0.0
        for start in range(0, n, tcfg.batch_size):
            idxs = perm[start:start + tcfg.batch_size]
            batch = _encode_batch(images_norm, idxs, tcfg.T, tcfg.seed, epoch)
            preds, trace = forward_batch(net, batch)
            batch_loss = 0.5 * np.sum((preds - onehot[idxs]) ** 2, axis=1).mean()
            if not np.isfinite(batch_loss):
                raise TrainingDivergence(
                    f"non-finite loss at epoch {epoch} (tau_m={ncfg.tau_m}, lr={lr})")
            loss_sum += batch_loss * len(idxs)
            gset = backward_batch(trace, net, onehot[idxs])
            sgd_step(net, gset, lr)
        entry = {"epoch": epoch, "lr": lr, "loss": loss_sum / n}
        if eval_every and (epoch % eval_every == 0 or epoch == tcfg.epochs):
            entry["train"] = evaluate(net, dataset, clean, tcfg.T, seeds)
            if test_dataset is not None:
                entry["test"] = evaluate(net, test_dataset, clean, tcfg.T, seeds)
        history.append(entry)
    return net, history
