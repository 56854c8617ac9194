"""Command-line surface.

    snnlab <train|evaluate-noise|coherence-table|spectrum|report>
           --config <path> [--out <dir>] [--seed <n> ...]

The output directory resolves as --out, then $SNNLAB_OUT, then the config's
[output] dir, then ./out. All emitted CSVs have fixed headers and
byte-reproduce for identical config and seeds. Exit codes: 0 ok, 2 config
error, 3 training divergence, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from snnlab.analysis import evaluate
from snnlab.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from snnlab.coherence import CoherenceParams, coherence_fn, estimate_coherence_mc, \
    simulate_lif_sde
from snnlab.config import ConfigError, ExperimentConfig, load_config, _fmt_tau
from snnlab.datasets import Dataset, IdxError, load_idx, synth_dataset
from snnlab.encoding import GAUSSIAN, NoiseSpec, normalize, poisson_encode
from snnlab.network import build_network
from snnlab.training import TrainingDivergence, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4

ENV_OUT = "SNNLAB_OUT"


def _r(x) -> str:
    """Shortest round-trip decimal for a float; deterministic CSV cell."""
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def _resolve_out(args, cfg: ExperimentConfig) -> str:
    out = args.out or os.environ.get(ENV_OUT) or cfg.out_dir or "out"
    os.makedirs(out, exist_ok=True)
    return out


def _load_datasets(cfg: ExperimentConfig):
    if cfg.dataset_kind == "idx":
        train_ds = load_idx(cfg.dataset_path, cfg.labels_path or None, split="train")
        test_ds = load_idx(cfg.test_path, cfg.test_labels_path or None, split="test") \
            if cfg.test_path else train_ds
        return train_ds, test_ds
    train_ds = synth_dataset(cfg.dataset_kind, cfg.n_train, seed=cfg.dataset_seed,
                             size=cfg.image_size, noise=cfg.pixel_noise, split="train")
    test_ds = synth_dataset(cfg.dataset_kind, cfg.n_test, seed=cfg.dataset_seed + 1,
                            size=cfg.image_size, noise=cfg.pixel_noise, split="test")
    return train_ds, test_ds


def _ckpt_path(out, tau, seed):
    return os.path.join(out, f"model_tau{_fmt_tau(tau)}_seed{seed}.ckpt")


def _load_trained(out, cfg):
    nets = {}
    for tau in cfg.tau_m_values:
        for seed in cfg.seeds:
            path = _ckpt_path(out, tau, seed)
            if not os.path.exists(path):
                raise FileNotFoundError(
                    f"missing checkpoint {path}; run `snnlab train` first")
            nets[(tau, seed)] = load_checkpoint(path)
    return nets


def cmd_train(cfg: ExperimentConfig, out: str) -> int:
    train_ds, test_ds = _load_datasets(cfg)
    for tau in cfg.tau_m_values:
        ncfg = cfg.neuron_config(tau)
        for seed in cfg.seeds:
            net = build_network(cfg.architecture, ncfg, init_seed=seed)
            net, hist = train(net, train_ds, cfg.train_config(seed), ncfg,
                              test_dataset=test_ds)
            save_checkpoint(net, _ckpt_path(out, tau, seed))
            rows = []
            for h in hist:
                tr, te = h.get("train"), h.get("test")
                rows.append([h["epoch"], _r(h["lr"]), _r(h["loss"]),
                             _r(tr.sse_train) if tr else "", _r(tr.accuracy) if tr else "",
                             _r(te.sse_test) if te else "", _r(te.accuracy) if te else "",
                             _r(tr.spike_activity) if tr else "",
                             tr.synaptic_ops if tr else ""])
            _write_csv(os.path.join(out, f"history_tau{_fmt_tau(tau)}_seed{seed}.csv"),
                       ["epoch", "lr", "loss", "train_sse", "train_acc",
                        "test_sse", "test_acc", "spikes_frac", "synaptic_ops"], rows)
    return EXIT_OK


def cmd_evaluate_noise(cfg: ExperimentConfig, out: str) -> int:
    _, test_ds = _load_datasets(cfg)
    nets = _load_trained(out, cfg)
    rows = []
    for tau in cfg.tau_m_values:
        for seed in cfg.seeds:
            net = nets[(tau, seed)]
            for kind, scenario, sev, spec in cfg.noise_specs():
                m = evaluate(net, test_ds, spec, cfg.T, [seed])
                rows.append([_fmt_tau(tau), seed, kind, scenario, sev,
                             _r(m.accuracy), _r(m.sse_test)])
    _write_csv(os.path.join(out, "noise_sweep.csv"),
               ["tau_m", "seed", "kind", "scenario", "severity", "accuracy", "sse_test"],
               rows)
    return EXIT_OK


def cmd_coherence_table(cfg: ExperimentConfig, out: str) -> int:
    p = CoherenceParams(mu=cfg.mu, D=cfg.D)
    rng = np.random.default_rng([int(cfg.seeds[0]), 77])
    times, rec = simulate_lif_sde(p, cfg.sde_dt, cfg.duration, rng)
    curve = estimate_coherence_mc(times, rec, cfg.segment_length)
    mask = curve.frequencies <= cfg.omega_max
    rows = []
    for om, c_mc in zip(curve.frequencies[mask], curve.values[mask]):
        rows.append([_r(om), _r(coherence_fn(om, p)), _r(c_mc)])
    _write_csv(os.path.join(out, "coherence_table.csv"),
               ["omega", "C_analytic", "C_montecarlo"], rows)
    return EXIT_OK


def cmd_spectrum(cfg: ExperimentConfig, out: str) -> int:
    _, test_ds = _load_datasets(cfg)
    nets = _load_trained(out, cfg)
    # averaged input spike spectrum over clean encodings of the test set
    from snnlab.analysis import critical_frequency, spike_spectrum
    mags = None
    seed0 = int(cfg.seeds[0])
    for i, img in enumerate(test_ds.images):
        rng = np.random.default_rng([seed0, i])
        st = poisson_encode(normalize(np.moveaxis(img, -1, 0)), cfg.T, rng)
        sp = spike_spectrum(st.values)
        mags = sp.values if mags is None else mags + sp.values
        freqs = sp.frequencies
    mags = mags / test_ds.images.shape[0]
    _write_csv(os.path.join(out, "input_spectrum.csv"), ["frequency", "magnitude"],
               [[_r(f), _r(m)] for f, m in zip(freqs, mags)])
    noisy = NoiseSpec(GAUSSIAN, 5, 1)
    clean = NoiseSpec()
    rows = []
    for tau in cfg.tau_m_values:
        for seed in cfg.seeds:
            net = nets[(tau, seed)]
            for cond, spec in (("clean", clean), ("gaussian5", noisy)):
                m = evaluate(net, test_ds, spec, cfg.T, [seed])
                rows.append([_fmt_tau(tau), seed, cond, _r(m.critical_freq)])
    _write_csv(os.path.join(out, "critical_frequency.csv"),
               ["tau_m", "seed", "condition", "critical_freq"], rows)
    return EXIT_OK


def cmd_report(cfg: ExperimentConfig, out: str) -> int:
    train_ds, test_ds = _load_datasets(cfg)
    nets = _load_trained(out, cfg)
    clean = NoiseSpec()
    rows = []
    for tau in cfg.tau_m_values:
        accs, stra, ste, act, ops = [], [], [], [], 0
        for seed in cfg.seeds:
            net = nets[(tau, seed)]
            mtr = evaluate(net, train_ds, clean, cfg.T, [seed])
            mte = evaluate(net, test_ds, clean, cfg.T, [seed])
            accs.append(mte.accuracy)
            stra.append(mtr.sse_train)
            ste.append(mte.sse_test)
            act.append(mte.spike_activity)
            ops += mte.synaptic_ops
        rows.append([_fmt_tau(tau), _r(np.mean(accs)), _r(np.mean(stra)),
                     _r(np.mean(ste)), _r(np.mean(act)), ops])
    _write_csv(os.path.join(out, "report.csv"),
               ["tau_m", "test_accuracy", "sse_train", "sse_test",
                "spikes_frac", "synaptic_ops"], rows)
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "evaluate-noise": cmd_evaluate_noise,
    "coherence-table": cmd_coherence_table,
    "spectrum": cmd_spectrum,
    "report": cmd_report,
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="snnlab", description=__doc__)
    ap.add_argument("command", choices=sorted(_COMMANDS))
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default=None)
    ap.add_argument("--seed", type=int, nargs="+", default=None)
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed:
            cfg = ExperimentConfig(**{**cfg.__dict__, "seeds": tuple(args.seed)})
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out = _resolve_out(args, cfg)
        return _COMMANDS[args.command](cfg, out)
    except TrainingDivergence as e:
        print(f"training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (OSError, CheckpointError, IdxError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
