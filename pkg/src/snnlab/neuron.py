"""IF/LIF membrane dynamics.

The discrete update used by the trainer, per time-step and per unit:

    u' = u + weighted_input
    if u' > v_th:   spike, u'' = u_rest
    else:           u'' = d * u'          with d = exp(-1/tau_m)

The order matters: integrate, test, then decay-or-reset. tau_m = inf gives the
non-leaky IF model (d = 1). The output layer never spikes; it decays its
previous potential and accumulates the new weighted input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INFINITE = math.inf


@dataclass(frozen=True)
class NeuronConfig:
    """Membrane parameters shared by every spiking unit of a network.

    tau_m is measured in time-steps; math.inf selects the IF model. epsilon
    is the leak-correction term in the surrogate denominator 1/(v_th+epsilon).
    """

    tau_m: float = INFINITE
    v_th: float = 1.0
    u_rest: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        if not (self.tau_m > 0):
            raise ValueError(f"tau_m must be positive or inf, got {self.tau_m}")
        if not (self.v_th > self.u_rest):
            raise ValueError(
                f"v_th ({self.v_th}) must exceed u_rest ({self.u_rest})")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")


@dataclass
class LayerState:
    """Membrane potentials and last spike outputs of one layer."""

    u: np.ndarray
    o: np.ndarray = field(default=None)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        if self.o is None:
            self.o = np.zeros_like(self.u)
        else:
            self.o = np.asarray(self.o, dtype=np.float64)
        if self.o.shape != self.u.shape:
            raise ValueError("u and o shapes differ")


def decay_factor(cfg: NeuronConfig) -> float:
    """Per-step decay d = exp(-1/tau_m); exactly 1.0 for the IF model."""
    if math.isinf(cfg.tau_m):
        return 1.0
    return math.exp(-1.0 / cfg.tau_m)


def integrate_step(state: LayerState, weighted_input: np.ndarray,
                   cfg: NeuronConfig) -> tuple[np.ndarray, LayerState]:
    """One hidden-layer step: integrate, threshold, reset or decay.

    Returns (spikes, new_state). Spikes are 0/1 floats. A unit spikes iff the
    integrated potential strictly exceeds v_th; it then resets to u_rest,
    otherwise the potential decays by exp(-1/tau_m).
    """
    w = np.asarray(weighted_input, dtype=np.float64)
    if w.shape != state.u.shape:
        raise ValueError(f"shape mismatch: state {state.u.shape} vs input {w.shape}")
    u = state.u + w
    spikes = (u > cfg.v_th).astype(np.float64)
    d = decay_factor(cfg)
    u_next = np.where(spikes > 0, cfg.u_rest, d * u)
    return spikes, LayerState(u=u_next, o=spikes)


def accumulate_output_step(state: LayerState, weighted_input: np.ndarray,
                           cfg: NeuronConfig) -> LayerState:
    """One output-layer step: u' = d*u + input. Never spikes, never resets."""
    w = np.asarray(weighted_input, dtype=np.float64)
    if w.shape != state.u.shape:
        raise ValueError(f"shape mismatch: state {state.u.shape} vs input {w.shape}")
    u_next = decay_factor(cfg) * state.u + w
    return LayerState(u=u_next, o=np.zeros_like(u_next))


def surrogate_grad(spike, cfg: NeuronConfig):
    """Derivative stand-in for the spike nonlinearity.

    1/(v_th+epsilon) wherever a spike occurred, 0 elsewhere. Accepts scalars
    or arrays and matches the input shape.
    """
    s = np.asarray(spike, dtype=np.float64)
    g = np.where(s > 0, 1.0 / (cfg.v_th + cfg.epsilon), 0.0)
    if np.ndim(spike) == 0:
        return float(g)
    return g
