"""Power normalization, AWGN channel, and SNR bookkeeping.

The latent of dimension d is mapped onto k = d/2 complex channel symbols.
Under ``complex_paper`` the circularly-symmetric complex noise of variance
sigma_ch^2 per symbol lands as variance sigma_ch^2 / 2 on each real
component; ``real_simplified`` puts sigma_ch^2 on each real component
directly.  Both readings are kept so the noise-budget analysis can be
validated against either.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ParameterError

CHANNEL_MODELS = ("complex_paper", "real_simplified")


@dataclass(frozen=True)
class ChannelConfig:
    snr_db: float = 5.0
    model: str = "complex_paper"

    def __post_init__(self):
        if self.model not in CHANNEL_MODELS:
            raise ParameterError(
                f"unknown channel model {self.model!r}; expected one of {CHANNEL_MODELS}"
            )
        if not math.isfinite(self.snr_db):
            raise ParameterError(f"snr_db must be finite, got {self.snr_db!r}")


@dataclass(frozen=True)
class NormalizedSignal:
    """Unit-average-power signal and the scaling gamma that produced it."""

    values: np.ndarray
    gamma: np.ndarray | float


def snr_to_noise_var(snr_db: float) -> float:
    """Channel noise variance at unit signal power: 10^(-snr_db / 10)."""
    if not math.isfinite(snr_db):
        raise ParameterError(f"snr_db must be finite, got {snr_db!r}")
    return float(10.0 ** (-snr_db / 10.0))


def effective_noise_var(sigma_ch2: float, model: str) -> float:
    """Per-real-component noise variance actually injected by awgn_apply."""
    if model not in CHANNEL_MODELS:
        raise ParameterError(f"unknown channel model {model!r}")
    return sigma_ch2 / 2.0 if model == "complex_paper" else float(sigma_ch2)


def power_normalize(z) -> NormalizedSignal:
    """Scale z to unit average power per component.

    gamma = 1 / sqrt(mean(z^2)) along the last axis; for a batch the scaling
    is per row.  A zero signal has no defined scaling.
    """
    z = np.asarray(z, dtype=float)
    power = np.mean(z * z, axis=-1)
    if np.any(power == 0.0):
        raise DegenerateInputError("cannot power-normalize a zero signal")
    gamma = 1.0 / np.sqrt(power)
    values = z * gamma[..., None] if z.ndim > 1 else gamma * z
    return NormalizedSignal(values=values, gamma=gamma if z.ndim > 1 else float(gamma))


def awgn_apply(signal, sigma_ch2: float, rng, model: str = "complex_paper") -> np.ndarray:
    """Add white Gaussian channel noise to a (normalized) signal."""
    if sigma_ch2 < 0:
        raise ParameterError(f"sigma_ch2 must be >= 0, got {sigma_ch2}")
    values = signal.values if isinstance(signal, NormalizedSignal) else np.asarray(signal, dtype=float)
    var = effective_noise_var(sigma_ch2, model)
    if model == "complex_paper" and values.shape[-1] % 2 != 0:
        raise ParameterError(
            f"complex channel needs an even dimension, got {values.shape[-1]}"
        )
    noise = rng.standard_normal(values.shape)
    return values + np.sqrt(var) * noise


def measure_snr(sent, received) -> float:
    """Empirical SNR in dB over a batch; +inf when the noise power is zero."""
    sent = np.asarray(sent, dtype=float)
    received = np.asarray(received, dtype=float)
    if sent.shape != received.shape:
        raise ParameterError(f"shape mismatch: {sent.shape} vs {received.shape}")
    noise_power = float(np.sum((received - sent) ** 2))
    if noise_power == 0.0:
        return math.inf
    return 10.0 * math.log10(float(np.sum(sent * sent)) / noise_power)
