"""End-to-end desk-scale trend experiment.

Trains every (tau_m, seed) model in the config, sweeps encoding noise,
measures spectra, and prints the four headline comparisons: noise
robustness, spiking sparsity, critical frequency, and generalization at
matched training error.

    python3 scripts/run_trends.py [--config configs/desk.ini] [--out out/trends]
"""

import argparse
import csv
import math
import os
import sys
from collections import defaultdict

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from snnlab.cli import main as cli_main
from snnlab.config import _fmt_tau, load_config


def _read(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def _mean(rows, key):
    return float(np.mean([float(r[key]) for r in rows]))


def summarize(cfg, out):
    taus = [_fmt_tau(t) for t in cfg.tau_m_values]

    print("\n== clean performance (3-seed means) ==")
    for r in _read(os.path.join(out, "report.csv")):
        print(f"  tau_m={r['tau_m']:>5}  acc={float(r['test_accuracy']):.4f}  "
              f"sse_train={float(r['sse_train']):.2f}  "
              f"sse_test={float(r['sse_test']):.2f}  "
              f"spikes={float(r['spikes_frac']):.4f}  ops={r['synaptic_ops']}")

    print("\n== noise robustness: accuracy drop severity 0 -> 8 ==")
    sweep = _read(os.path.join(out, "noise_sweep.csv"))
    for kind in cfg.noise_kinds:
        for scen in cfg.scenarios:
            line = [f"  {kind} scenario {scen}:"]
            for tau in taus:
                rows = [r for r in sweep if r["tau_m"] == tau
                        and r["kind"] == kind and r["scenario"] == str(scen)]
                a0 = _mean([r for r in rows if r["severity"] == "0"], "accuracy")
                a8 = _mean([r for r in rows if r["severity"] == "8"], "accuracy")
                line.append(f"tau={tau} drop={a0 - a8:+.4f}")
            print("  ".join(line))

    print("\n== critical frequency (70% spectral power) ==")
    cfreq = _read(os.path.join(out, "critical_frequency.csv"))
    for tau in taus:
        by_cond = defaultdict(list)
        for r in cfreq:
            if r["tau_m"] == tau:
                by_cond[r["condition"]].append(float(r["critical_freq"]))
        clean = float(np.mean(by_cond["clean"]))
        noisy = float(np.mean(by_cond["gaussian5"]))
        print(f"  tau_m={tau:>5}  clean={clean:.3f}  gaussian5={noisy:.3f}  "
              f"shift={noisy - clean:+.3f}")

    print("\n== generalization: test SSE at matched training SSE ==")
    hist = {}
    for tau in taus:
        tr, te = [], []
        for seed in cfg.seeds:
            rows = _read(os.path.join(out, f"history_tau{tau}_seed{seed}.csv"))
            tr += [float(r["train_sse"]) for r in rows if r["train_sse"]]
            te += [float(r["test_sse"]) for r in rows if r["test_sse"]]
        hist[tau] = (np.array(tr), np.array(te))
    lo = max(h[0].min() for h in hist.values())
    hi = min(h[0].max() for h in hist.values())
    if lo >= hi:
        print("  (training-SSE ranges do not overlap; nothing to compare)")
        return
    grid = np.geomspace(lo * 1.05, hi * 0.95, 8)
    print("  train SSE grid: " + "  ".join(f"{g:7.2f}" for g in grid))
    for tau in taus:
        tr, te = hist[tau]
        order = np.argsort(tr)
        interp = np.interp(grid, tr[order], te[order])
        print(f"  tau={tau:>5} test SSE: " + "  ".join(f"{v:7.2f}" for v in interp))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/desk.ini")
    ap.add_argument("--out", default="out/trends")
    ap.add_argument("--skip-train", action="store_true",
                    help="reuse checkpoints already present in --out")
    args = ap.parse_args()

    cfg = load_config(args.config)
    commands = ["evaluate-noise", "spectrum", "report"]
    if not args.skip_train:
        commands.insert(0, "train")
    for cmd in commands:
        print(f"-- snnlab {cmd}")
        rc = cli_main([cmd, "--config", args.config, "--out", args.out])
        if rc != 0:
            sys.exit(rc)
    summarize(cfg, args.out)


if __name__ == "__main__":
    main()
