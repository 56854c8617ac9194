"""INI experiment configuration.

Sections: [dataset], [network], [neuron], [training], [noise], [coherence],
[output]. Comma lists are used for sweeps (tau_m values, seeds, severities,
noise kinds, scenarios). tau_m accepts "inf"/"infinite" for the IF model.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, fields

from snnlab.encoding import GAUSSIAN, IMPULSE, NONE, NoiseSpec
from snnlab.network import parse_architecture
from snnlab.neuron import NeuronConfig
from snnlab.training import TrainConfig


class ConfigError(ValueError):
    pass


def _parse_tau(tok: str) -> float:
    t = tok.strip().lower()
    if t in ("inf", "infinite", "infinity"):
        return math.inf
    return float(t)


def _fmt_tau(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:g}"


def _ints(s: str) -> tuple:
    return tuple(int(t) for t in s.split(",") if t.strip())


def _strs(s: str) -> tuple:
    return tuple(t.strip().lower() for t in s.split(",") if t.strip())


@dataclass
class ExperimentConfig:
    # network / neuron
    architecture: str = "16x16-8C3-2P-64FC-2o"
    tau_m_values: tuple = (30.0, math.inf)
    v_th: float = 1.0
    u_rest: float = 0.0
    epsilon: float = 0.0
    # training
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 0.05
    lr_decay_epochs: tuple = ()
    lr_decay_factor: float = 0.1
    T: int = 20
    seeds: tuple = (1, 2, 3)
    # noise sweep
    noise_kinds: tuple = (GAUSSIAN, IMPULSE)
    severities: tuple = tuple(range(9))
    scenarios: tuple = (1, 2)
    # dataset
    dataset_kind: str = "bars"
    dataset_seed: int = 0
    n_train: int = 128
    n_test: int = 64
    image_size: int = 16
    pixel_noise: float = 0.1
    dataset_path: str = ""
    labels_path: str = ""
    test_path: str = ""
    test_labels_path: str = ""
    # coherence table
    mu: float = 0.8
    D: float = 0.1
    sde_dt: float = 1e-3
    duration: float = 20000.0
    segment_length: float = 50.0
    omega_max: float = 5.0
    # output
    out_dir: str = ""

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seed list must be non-empty")
        try:
            parse_architecture(self.architecture)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        for k in self.noise_kinds:
            if k not in (GAUSSIAN, IMPULSE):
                raise ConfigError(f"unknown noise kind {k!r}")
        for s in self.scenarios:
            if s not in (1, 2):
                raise ConfigError(f"scenario must be 1 or 2, got {s}")
        for s in self.severities:
            if not 0 <= s <= 8:
                raise ConfigError(f"severity {s} outside [0, 8]")
        if self.dataset_kind not in ("bars", "two-gaussians", "idx"):
            raise ConfigError(f"unknown dataset kind {self.dataset_kind!r}")

    def neuron_config(self, tau_m: float) -> NeuronConfig:
        return NeuronConfig(tau_m=tau_m, v_th=self.v_th, u_rest=self.u_rest,
                            epsilon=self.epsilon)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size,
                           learning_rate=self.learning_rate,
                           lr_decay_epochs=self.lr_decay_epochs,
                           lr_decay_factor=self.lr_decay_factor,
                           T=self.T, seed=seed)

    def noise_specs(self):
        """The configured sweep as (kind, scenario, severity, NoiseSpec) rows;
        severity 0 carries a clean spec but keeps the sweep kind label."""
        out = []
        for kind in self.noise_kinds:
            for scenario in self.scenarios:
                for sev in self.severities:
                    spec = NoiseSpec(NONE, 0, scenario) if sev == 0 \
                        else NoiseSpec(kind, sev, scenario)
                    out.append((kind, scenario, sev, spec))
        return out


def parse_config(text: str) -> ExperimentConfig:
    """Parse INI text into an ExperimentConfig; raises ConfigError."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"bad config syntax: {e}") from e
    kw = {}
    try:
        if cp.has_section("network"):
            s = cp["network"]
            if "architecture" in s:
                kw["architecture"] = s["architecture"].strip()
        if cp.has_section("neuron"):
            s = cp["neuron"]
            if "tau_m" in s:
                kw["tau_m_values"] = tuple(_parse_tau(t) for t in s["tau_m"].split(","))
            for k in ("v_th", "u_rest", "epsilon"):
                if k in s:
                    kw[k] = float(s[k])
        if cp.has_section("training"):
            s = cp["training"]
            for k in ("epochs", "batch_size", "t"):
                if k in s:
                    kw["T" if k == "t" else k] = int(s[k])
            for k in ("learning_rate", "lr_decay_factor"):
                if k in s:
                    kw[k] = float(s[k])
            if "lr_decay_epochs" in s:
                kw["lr_decay_epochs"] = _ints(s["lr_decay_epochs"])
            if "seeds" in s:
                kw["seeds"] = _ints(s["seeds"])
        if cp.has_section("noise"):
            s = cp["noise"]
            if "kinds" in s:
                kw["noise_kinds"] = _strs(s["kinds"])
            if "severities" in s:
                kw["severities"] = _ints(s["severities"])
            if "scenarios" in s:
                kw["scenarios"] = _ints(s["scenarios"])
        if cp.has_section("dataset"):
            s = cp["dataset"]
            if "kind" in s:
                kw["dataset_kind"] = s["kind"].strip().lower()
            for k in ("dataset_seed", "n_train", "n_test", "image_size"):
                if k in s:
                    kw[k] = int(s[k])
            if "pixel_noise" in s:
                kw["pixel_noise"] = float(s["pixel_noise"])
            for k in ("dataset_path", "labels_path", "test_path", "test_labels_path"):
                if k in s:
                    kw[k] = s[k].strip()
        if cp.has_section("coherence"):
            s = cp["coherence"]
            for k in ("mu", "d", "sde_dt", "duration", "segment_length", "omega_max"):
                if k in s:
                    kw["D" if k == "d" else k] = float(s[k])
        if cp.has_section("output"):
            if "dir" in cp["output"]:
                kw["out_dir"] = cp["output"]["dir"].strip()
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"bad config value: {e}") from e
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as f:
            return parse_config(f.read())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e


def serialize_config(cfg: ExperimentConfig) -> str:
    """Deterministic INI text; parse_config(serialize_config(c)) == c."""
    cp = configparser.ConfigParser()
    cp["network"] = {"architecture": cfg.architecture}
    cp["neuron"] = {
        "tau_m": ", ".join(_fmt_tau(t) for t in cfg.tau_m_values),
        "v_th": f"{cfg.v_th:g}", "u_rest": f"{cfg.u_rest:g}",
        "epsilon": f"{cfg.epsilon:g}"}
    cp["training"] = {
        "epochs": str(cfg.epochs), "batch_size": str(cfg.batch_size),
        "learning_rate": repr(cfg.learning_rate),
        "lr_decay_epochs": ", ".join(map(str, cfg.lr_decay_epochs)),
        "lr_decay_factor": repr(cfg.lr_decay_factor),
        "t": str(cfg.T), "seeds": ", ".join(map(str, cfg.seeds))}
    cp["noise"] = {
        "kinds": ", ".join(cfg.noise_kinds),
        "severities": ", ".join(map(str, cfg.severities)),
        "scenarios": ", ".join(map(str, cfg.scenarios))}
    cp["dataset"] = {
        "kind": cfg.dataset_kind, "dataset_seed": str(cfg.dataset_seed),
        "n_train": str(cfg.n_train), "n_test": str(cfg.n_test),
        "image_size": str(cfg.image_size), "pixel_noise": repr(cfg.pixel_noise),
        "dataset_path": cfg.dataset_path, "labels_path": cfg.labels_path,
        "test_path": cfg.test_path, "test_labels_path": cfg.test_labels_path}
    cp["coherence"] = {
        "mu": repr(cfg.mu), "d": repr(cfg.D), "sde_dt": repr(cfg.sde_dt),
        "duration": repr(cfg.duration),
        "segment_length": repr(cfg.segment_length),
        "omega_max": repr(cfg.omega_max)}
    cp["output"] = {"dir": cfg.out_dir}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
