"""Spiking-network lab: IF/LIF training with surrogate gradients plus the
analytic coherence machinery of the noise-driven leaky integrator."""

from snnlab.neuron import NeuronConfig, LayerState, decay_factor, integrate_step, \
    accumulate_output_step, surrogate_grad
from snnlab.encoding import NoiseSpec, SpikeTensor, normalize, poisson_encode, \
    sample_noise, encode_noisy
from snnlab.network import LayerSpec, ForwardTrace, NetworkState, parse_architecture, \
    build_network, layer_apply, forward
from snnlab.training import TrainConfig, GradientSet, compute_loss, backward, train
from snnlab.coherence import CoherenceParams, SpectrumCurve, StimulusRecord, pcf, \
    firing_rate, cross_spectrum, power_spectrum, coherence_fn, simulate_lif_sde, \
    estimate_coherence_mc
from snnlab.analysis import RunMetrics, spike_spectrum, critical_frequency, enwsi, \
    count_synaptic_ops, evaluate
from snnlab.datasets import Dataset, load_idx, synth_dataset

__version__ = "0.1.0"
