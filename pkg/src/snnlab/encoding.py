"""Image normalization and noisy Poisson spike encoding.

Pixels are normalized to zero mean and unit max-abs, then rate-coded: at each
time-step a pixel of normalized value p emits a spike with probability |p|,
carrying sign(p). Two corruption scenarios are supported:

  scenario 1 (pixel noise):  the noise draw is added to the pixel value at
      every time-step before the uniform-number comparison; outputs stay in
      {-1, 0, +1}.
  scenario 2 (spike noise):  clean spikes are generated first and the noise
      draw is added to every spike value; outputs are real-valued.

Noise touches the input layer only; hidden layers never see a NoiseSpec.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GAUSSIAN = "gaussian"
IMPULSE = "impulse"
NONE = "none"
PIXEL_NOISE = 1   # scenario 1
SPIKE_NOISE = 2   # scenario 2

# severity k maps to sigma = GAUSS_STEP*k (gaussian) or p = IMPULSE_STEP*k (impulse)
GAUSS_STEP = 0.05
IMPULSE_STEP = 0.02


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = NONE
    severity: int = 0
    scenario: int = PIXEL_NOISE

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, IMPULSE, NONE):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not (0 <= self.severity <= 8):
            raise ValueError(f"severity must be in [0, 8], got {self.severity}")
        if (self.severity == 0) != (self.kind == NONE):
            raise ValueError("severity 0 iff kind none")
        if self.scenario not in (PIXEL_NOISE, SPIKE_NOISE):
            raise ValueError(f"scenario must be 1 or 2, got {self.scenario}")


@dataclass
class SpikeTensor:
    """Time-major spike array, shape (T, *pixel_shape).

    binary=True promises every value is in {-1, 0, +1}; scenario-2 outputs
    are perturbed around those values and drop the flag.
    """

    values: np.ndarray
    binary: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.binary:
            ok = np.isin(self.values, (-1.0, 0.0, 1.0))
            if not ok.all():
                raise ValueError("binary SpikeTensor holds values outside {-1,0,+1}")

    @property
    def T(self) -> int:
        return self.values.shape[0]


def normalize(pixels) -> np.ndarray:
    """Zero-mean, max-abs-1 normalization; a constant image maps to zeros."""
    p = np.asarray(pixels, dtype=np.float64)
    if p.size == 0:
        raise ValueError("empty image")
    centered = p - p.mean()
    m = np.abs(centered).max()
    # constant images leave only rounding residue after centering; scaling
    # that residue up to +-1 would fabricate signal out of noise
    if m <= 1e-12 * np.abs(p).max() or m == 0.0:
        return np.zeros_like(p)
    return centered / m


def poisson_encode(pixels, T: int, rng: np.random.Generator) -> SpikeTensor:
    """Rate-code normalized pixels over T steps.

    Spike probability is |pixel| against a fresh uniform draw in [0,1) per
    pixel per step (strict >); the spike carries the pixel's sign.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    p = np.asarray(pixels, dtype=np.float64)
    u = rng.random((T,) + p.shape)
    spikes = np.where(np.abs(p) > u, np.sign(p), 0.0)
    return SpikeTensor(values=spikes, binary=True)


def sample_noise(spec: NoiseSpec, rng: np.random.Generator, size=None):
    """Draw noise per the spec; scalar when size is None.

    Gaussian: N(0, (0.05*severity)^2). Impulse: +-1 with total probability
    0.02*severity (signs equiprobable), else 0.
    """
    if spec.kind == NONE:
        raise ValueError("sample_noise needs kind gaussian or impulse")
    if spec.kind == GAUSSIAN:
        sigma = GAUSS_STEP * spec.severity
        out = rng.normal(0.0, sigma, size=size)
    else:
        p = IMPULSE_STEP * spec.severity
        u = rng.random(size=size)
        signs = rng.random(size=size)
        out = np.where(u < p, np.where(signs < 0.5, -1.0, 1.0), 0.0)
    if size is None:
        return float(out)
    return out


def encode_noisy(pixels, T: int, spec: NoiseSpec,
                 rng: np.random.Generator) -> SpikeTensor:
    """Poisson-encode under one of the two corruption scenarios.

    kind=none delegates to poisson_encode so the severity-0 case is
    bit-identical to clean encoding on the same rng stream.
    """
    if spec.kind == NONE:
        return poisson_encode(pixels, T, rng)
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    p = np.asarray(pixels, dtype=np.float64)
    if spec.scenario == PIXEL_NOISE:
        # independent draw per pixel per step, added before the comparison
        xi = sample_noise(spec, rng, size=(T,) + p.shape)
        noisy = p + xi
        u = rng.random((T,) + p.shape)
        spikes = np.where(np.abs(noisy) > u, np.sign(noisy), 0.0)
        return SpikeTensor(values=spikes, binary=True)
    clean = poisson_encode(p, T, rng)
    xi = sample_noise(spec, rng, size=(T,) + p.shape)
    return SpikeTensor(values=clean.values + xi, binary=False)
