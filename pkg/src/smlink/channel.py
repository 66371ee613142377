"""Flat MIMO channel models: Rician fading with per-path power imbalance.

Each entry of the (nr, nt) channel matrix is drawn independently as

    h = sqrt(K / (K + 1)) + sqrt(1 / (K + 1)) * w,   w ~ CN(0, 1),

i.e. a fixed zero-phase specular part plus a unit-variance diffuse part,
so E[|h|^2] = 1 before imbalance. K = 0 (``-inf`` dB) recovers Rayleigh
fading. A power-imbalance profile then scales entry (r, t) by
sqrt(10**(alpha_db[r, t] / 10)), expressing each path's average power
relative to the reference path (0, 0).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError

__all__ = [
    "FadingModel",
    "PowerImbalance",
    "ChannelRealization",
    "imbalance_profile",
    "draw_channel",
    "draw_channels",
    "propagate_symbols",
    "propagate_waveform",
    "awgn",
]

# Measured per-path gain offsets (dB) of two 2x2 receiver placements,
# rows = receive antenna, columns = transmit antenna.
_PROFILES = {
    "none": None,
    "rx_config_1": [[0.0, 0.88], [0.25, 1.10]],
    "rx_config_2": [[0.0, 1.13], [0.29, 1.17]],
}


@dataclass(frozen=True)
class FadingModel:
    """Rician small-scale fading with K factor in dB (-inf = Rayleigh)."""

    k_factor_db: float = float("-inf")

    @property
    def k_linear(self):
        if self.k_factor_db == float("-inf"):
            return 0.0
        return float(10.0 ** (self.k_factor_db / 10.0))

    @property
    def los_amplitude(self):
        k = self.k_linear
        return float(np.sqrt(k / (k + 1.0)))

    @property
    def diffuse_std(self):
        """Per-complex-entry std of the scattered part (total, both axes)."""
        return float(np.sqrt(1.0 / (self.k_linear + 1.0)))


@dataclass(frozen=True)
class PowerImbalance:
    """Per-path average-gain offsets in dB, shape (nr, nt).

    Entry (0, 0) is the reference and must be 0; all offsets must be
    finite and nonnegative (paths are expressed relative to the weakest).
    """

    alpha_db: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.alpha_db, dtype=np.float64))
        if a.ndim != 2:
            raise DimensionError("imbalance profile must be a 2-D matrix")
        if not np.isfinite(a).all():
            raise ConfigurationError("imbalance offsets must be finite")
        if a[0, 0] != 0.0:
            raise ConfigurationError("reference path offset alpha[0, 0] must be 0 dB")
        if (a < 0).any():
            raise ConfigurationError("imbalance offsets must be >= 0 dB")
        object.__setattr__(self, "alpha_db", a)

    @property
    def shape(self):
        return self.alpha_db.shape

    def amplitude_scale(self):
        """Entrywise sqrt(10**(alpha/10)) applied to the channel matrix."""
        return np.sqrt(10.0 ** (self.alpha_db / 10.0))


def imbalance_profile(name, nr=2, nt=2):
    """Named imbalance profile, or None for the balanced case."""
    if name not in _PROFILES:
        raise ConfigurationError(
            f"unknown imbalance profile {name!r}; choose from {sorted(_PROFILES)}"
        )
    raw = _PROFILES[name]
    if raw is None:
        return None
    pi = PowerImbalance(np.array(raw))
    if pi.shape != (nr, nt):
        raise DimensionError(
            f"profile {name!r} is for a {pi.shape} array, requested ({nr}, {nt})"
        )
    return pi


@dataclass(frozen=True)
class ChannelRealization:
    """One drawn channel matrix and the model that produced it."""

    h: np.ndarray
    fading: FadingModel
    imbalance: PowerImbalance | None = field(default=None)

    @property
    def nr(self):
        return self.h.shape[0]

    @property
    def nt(self):
        return self.h.shape[1]


def draw_channel(nr, nt, fading, imbalance=None, rng=None):
    """Draw one (nr, nt) channel matrix."""
    return draw_channels(1, nr, nt, fading, imbalance, rng)[0]


def draw_channels(n, nr, nt, fading, imbalance=None, rng=None):
    """Draw an (n, nr, nt) stack of independent channel matrices."""
    if rng is None:
        rng = np.random.default_rng()
    if imbalance is not None and imbalance.shape != (nr, nt):
        raise DimensionError(
            f"imbalance profile shape {imbalance.shape} does not match ({nr}, {nt})"
        )
    w = rng.standard_normal((n, nr, nt, 2))
    diffuse = (w[..., 0] + 1j * w[..., 1]) / np.sqrt(2.0)
    h = fading.los_amplitude + fading.diffuse_std * diffuse
    if imbalance is not None:
        h = h * imbalance.amplitude_scale()[None, :, :]
    return h


def awgn(shape, noise_var, rng):
    """Circular complex Gaussian noise with total variance noise_var."""
    w = rng.standard_normal(shape + (2,))
    return np.sqrt(noise_var / 2.0) * (w[..., 0] + 1j * w[..., 1])


def propagate_symbols(vectors, h, noise_var, rng):
    """y = H x + n for a block of (n, nt) transmit vectors.

    ``noise_var`` is the total variance per complex receive sample
    (split evenly between real and imaginary parts).
    """
    x = np.asarray(vectors)
    if x.ndim != 2 or x.shape[1] != h.shape[1]:
        raise DimensionError("transmit block must be (n, nt) matching H")
    y = x @ h.T
    if noise_var > 0:
        y = y + awgn(y.shape, noise_var, rng)
    return y


def propagate_waveform(samples, h, fo_cycles_per_sample=0.0, noise_var=0.0, rng=None):
    """Mix per-antenna sample streams through a flat channel.

    ``samples`` is (n_samples, nt); the output (n_samples, nr) is
    (samples @ H.T) rotated by exp(2j*pi*fo*k) -- a constant carrier
    frequency offset in cycles per sample -- plus complex AWGN of total
    variance ``noise_var`` per sample.
    """
    x = np.asarray(samples)
    if x.ndim != 2 or x.shape[1] != h.shape[1]:
        raise DimensionError("sample block must be (n_samples, nt) matching H")
    y = x @ h.T
    if fo_cycles_per_sample != 0.0:
        ramp = np.exp(2j * np.pi * fo_cycles_per_sample * np.arange(x.shape[0]))
        y = y * ramp[:, None]
    if noise_var > 0:
        if rng is None:
            raise ConfigurationError("rng is required when noise_var > 0")
        y = y + awgn(y.shape, noise_var, rng)
    return y
