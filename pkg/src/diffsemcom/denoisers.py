"""Noise-predictor contract, analytic Gaussian-mixture denoiser, and guidance.

The analytic denoiser is the workhorse oracle of the toy system: for a
diagonal Gaussian mixture source the diffused density at any step t is again
a mixture in closed form, so its score (and hence the optimal noise
prediction eps_hat = -sqrt(1 - alpha_bar_t) * score) is exact.  Conditioning
is a discrete component label standing in for a prompt embedding; ``None``
means unconditional.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .schedule import NoiseSchedule

_LOG_2PI = float(np.log(2.0 * np.pi))


class Denoiser(abc.ABC):
    """Anything that predicts the injected noise from (z, t, cond)."""

    @abc.abstractmethod
    def predict(self, z: np.ndarray, t: int, cond: int | None = None) -> np.ndarray:
        """Return eps_hat with the same shape as ``z`` (last axis = dimension)."""


@dataclass(frozen=True)
class GaussianMixtureModel:
    """Diagonal-covariance Gaussian mixture over R^d.

    weights: (J,), positive, summing to 1 within 1e-12.
    means: (J, d).  variances: (J, d), strictly positive (per-dimension).
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        m = np.atleast_2d(np.asarray(self.means, dtype=float))
        v = np.atleast_2d(np.asarray(self.variances, dtype=float))
        if w.ndim != 1 or w.size == 0:
            raise ParameterError("weights must be a non-empty 1-D array")
        if np.any(w <= 0.0):
            raise ParameterError("all mixture weights must be positive")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ParameterError(f"weights sum to {w.sum()!r}, not 1 within 1e-12")
        if m.shape[0] != w.size or v.shape != m.shape:
            raise ParameterError(
                f"inconsistent shapes: weights {w.shape}, means {m.shape}, variances {v.shape}"
            )
        if np.any(v <= 0.0):
            raise ParameterError("all variances must be positive")
        for arr in (w, m, v):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)

    @property
    def d(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.weights.size

    @classmethod
    def standard_normal(cls, d: int) -> "GaussianMixtureModel":
        return cls(np.ones(1), np.zeros((1, d)), np.ones((1, d)))


def gmm_sample(model, n, rng, return_labels=False):
    """Draw n i.i.d. samples; deterministic given the generator state."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    labels = rng.choice(model.n_components, size=int(n), p=model.weights)
    eps = rng.standard_normal((int(n), model.d))
    out = model.means[labels] + np.sqrt(model.variances[labels]) * eps
    if return_labels:
        return out, labels
    return out


def gmm_marginal(model, schedule: NoiseSchedule, t: int) -> GaussianMixtureModel:
    """Mixture after t forward-diffusion steps.

    Component j becomes N(sqrt(ab_t) mu_j, ab_t sigma0_j^2 + (1 - ab_t)) with
    ab_t the cumulative retention at t; weights are unchanged.
    """
    if not (0 <= t <= schedule.t_train):
        raise ParameterError(f"t={t} outside 0..{schedule.t_train}")
    ab = schedule.alpha_bars[t]
    return GaussianMixtureModel(
        model.weights, np.sqrt(ab) * model.means, ab * model.variances + (1.0 - ab)
    )


def gmm_log_density(model, z):
    """log p(z) for z of shape (..., d), via log-sum-exp over components."""
    z = np.asarray(z, dtype=float)
    logp = _component_log_density(model, z)
    return _logsumexp(logp + np.log(model.weights), axis=-1)


def _component_log_density(model, z):
    diff = z[..., None, :] - model.means  # (..., J, d)
    v = model.variances
    return -0.5 * np.sum(diff * diff / v + np.log(v) + _LOG_2PI, axis=-1)


def _logsumexp(a, axis):
    m = np.max(a, axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def gmm_score(model, schedule, z, t, cond=None):
    """Gradient of log p_t at z for the diffused (optionally conditional) mixture.

    Responsibilities are computed in log space so far-from-mode probes at
    large t do not underflow.
    """
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != model.d:
        raise ParameterError(f"z has dimension {z.shape[-1]}, model has {model.d}")
    if not np.all(np.isfinite(z)):
        raise ParameterError("z contains non-finite values")
    mt = gmm_marginal(model, schedule, t)
    if cond is not None:
        j = int(cond)
        if not (0 <= j < mt.n_components):
            raise ParameterError(f"cond={cond!r} outside 0..{mt.n_components - 1}")
        return (mt.means[j] - z) / mt.variances[j]
    logp = _component_log_density(mt, z) + np.log(mt.weights)
    logz = _logsumexp(logp, axis=-1)
    resp = np.exp(logp - logz[..., None])  # (..., J)
    comp_score = (mt.means - z[..., None, :]) / mt.variances  # (..., J, d)
    return np.sum(resp[..., None] * comp_score, axis=-2)


def eps_from_score(score_value, schedule, t):
    """Convert a score into the equivalent noise prediction.

    eps_hat = -sqrt(1 - alpha_bar_t) * score.  Defined for t = 0 too (the
    factor vanishes there), which the inversion loop relies on.
    """
    if not (0 <= t <= schedule.t_train):
        raise ParameterError(f"t={t} outside 0..{schedule.t_train}")
    return -np.sqrt(1.0 - schedule.alpha_bars[t]) * np.asarray(score_value, dtype=float)


def guide(eps_uncond, eps_cond, w):
    """Classifier-free guidance blend: eps_u + w * (eps_c - eps_u)."""
    eps_uncond = np.asarray(eps_uncond, dtype=float)
    eps_cond = np.asarray(eps_cond, dtype=float)
    if eps_uncond.shape != eps_cond.shape:
        raise ParameterError(
            f"shape mismatch: {eps_uncond.shape} vs {eps_cond.shape}"
        )
    if w < 0:
        raise ParameterError(f"guidance scale must be >= 0, got {w}")
    if w == 0.0:
        return np.array(eps_uncond)
    if w == 1.0:
        return np.array(eps_cond)
    return eps_uncond + w * (eps_cond - eps_uncond)


@dataclass(frozen=True)
class GuidanceConfig:
    """Guidance scale and the conditioning label (None = unconditional)."""

    w: float = 0.0
    cond: int | None = None

    def __post_init__(self):
        if self.w < 0:
            raise ParameterError(f"guidance scale must be >= 0, got {self.w}")


def guided_eps(denoiser, values, t, guidance):
    """Denoiser prediction under a GuidanceConfig (or None = unconditional)."""
    if guidance is None or guidance.cond is None:
        return denoiser.predict(values, t, None)
    if guidance.w == 1.0:
        return denoiser.predict(values, t, guidance.cond)
    return guide(
        denoiser.predict(values, t, None),
        denoiser.predict(values, t, guidance.cond),
        guidance.w,
    )


class GmmDenoiser(Denoiser):
    """Exact noise predictor for a Gaussian-mixture source."""

    def __init__(self, model: GaussianMixtureModel, schedule: NoiseSchedule):
        self.model = model
        self.schedule = schedule

    def predict(self, z, t, cond=None):
        score = gmm_score(self.model, self.schedule, z, t, cond)
        return eps_from_score(score, self.schedule, t)


class ConstantDenoiser(Denoiser):
    """Predicts a state-independent constant; the DDIM steps become affine."""

    def __init__(self, value):
        self.value = np.asarray(value, dtype=float)

    def predict(self, z, t, cond=None):
        z = np.asarray(z, dtype=float)
        return np.broadcast_to(self.value, z.shape).copy()
