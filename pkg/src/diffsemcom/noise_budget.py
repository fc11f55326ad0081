"""Noise budget of the split forward process, step selection, and its
Monte-Carlo validation.

For a transmitter that runs the stochastic forward to scheduler step T_F1,
scales by gamma, crosses an AWGN channel with per-component variance
sigma_eff^2, and then continues the forward process to T_F = T_F1 + T_F2,
the received latent is Gaussian around gamma * sqrt(ab_F) * z0 with variance

    sigma_eps^2 = 1 - r (1 - gamma^2) - gamma^2 ab_F      (diffusion part)
    sigma_n^2   = r * sigma_eff^2                          (channel part)

where r = ab_F / ab_F1 is the retention over the receiver-side leg.  The
diffusion part is recomputed through the equivalent form
(1 - r) + gamma^2 r (1 - ab_F1) as a guard against indexing bugs.

The matched denoising depth T_B is the smallest scheduler step whose nominal
noise level 1 - ab reaches sigma_tot^2 = sigma_eps^2 + sigma_n^2.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .channel import ChannelConfig, effective_noise_var, snr_to_noise_var
from .denoisers import gmm_sample
from .diffusion import Latent, run_ddim_invert
from .errors import InternalConsistencyError, ParameterError

GAMMA_MODES = ("per_sample", "forced_unit")


@dataclass(frozen=True)
class SplitConfig:
    """Scheduler-step counts of the transmitter / receiver forward legs."""

    t_f1: int
    t_f2: int

    def __post_init__(self):
        if self.t_f1 < 0 or self.t_f2 < 0:
            raise ParameterError(f"split counts must be >= 0, got {self}")

    @property
    def t_f(self) -> int:
        return self.t_f1 + self.t_f2


@dataclass(frozen=True)
class NoiseBudget:
    sigma_eps2: float
    sigma_n2: float
    sigma_tot2: float
    r: float
    gamma_used: float
    mean_coeff: float


def compute_noise_budget(schedule, plan, split: SplitConfig, gamma: float,
                         sigma_eff2: float) -> NoiseBudget:
    """Evaluate the budget formulas with steps resolved through the plan."""
    if split.t_f > plan.k:
        raise ParameterError(f"split {split} exceeds plan steps k={plan.k}")
    if gamma <= 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    if sigma_eff2 < 0:
        raise ParameterError(f"sigma_eff2 must be >= 0, got {sigma_eff2}")
    ab = schedule.alpha_bars
    t1 = plan.training_step(split.t_f1)
    tf = plan.training_step(split.t_f)
    r = float(ab[tf] / ab[t1])
    g2 = gamma * gamma
    sigma_eps2 = 1.0 - r * (1.0 - g2) - g2 * ab[tf]
    alt = (1.0 - r) + g2 * r * (1.0 - ab[t1])
    if abs(sigma_eps2 - alt) > 1e-12 * max(1.0, abs(sigma_eps2), abs(alt)):
        raise InternalConsistencyError(
            f"sigma_eps^2 identity violated: {sigma_eps2!r} vs {alt!r}"
        )
    sigma_n2 = r * sigma_eff2
    return NoiseBudget(
        sigma_eps2=float(sigma_eps2),
        sigma_n2=float(sigma_n2),
        sigma_tot2=float(sigma_eps2 + sigma_n2),
        r=r,
        gamma_used=float(gamma),
        mean_coeff=float(gamma * np.sqrt(ab[tf])),
    )


@dataclass(frozen=True)
class StepSelection:
    t_b: int
    saturated: bool


def select_denoise_steps(schedule, plan, sigma_tot2: float) -> StepSelection:
    """Smallest scheduler step whose nominal noise level covers sigma_tot2.

    Saturates (flagged, not an error) at k when even the deepest plan step
    falls short, which happens at very low SNR.
    """
    if sigma_tot2 < 0:
        raise ParameterError(f"sigma_tot2 must be >= 0, got {sigma_tot2}")
    levels = 1.0 - schedule.alpha_bars[plan.timesteps]
    idx = int(np.searchsorted(levels, sigma_tot2, side="left"))
    if idx >= plan.k:
        return StepSelection(t_b=plan.k, saturated=True)
    return StepSelection(t_b=idx + 1, saturated=False)


@dataclass
class Prop1Report:
    """Empirical vs predicted moments of the received latent."""

    n_samples: int
    dimension: int
    channel_model: str
    sigma_eff2: float
    gamma_mode: str
    transmitter_mode: str
    budget: NoiseBudget
    z0: np.ndarray
    emp_mean: np.ndarray
    emp_var: np.ndarray
    pooled_var: float
    var_rel_err: float
    mean_band: float
    frac_mean_within_band: float

    def passed(self, var_tol: float = 0.03) -> bool:
        """Variance within tolerance and the per-dim means inside their 3-sigma
        bands up to the expected handful of outliers (max of 3 and 1% of dims,
        since ~0.27% of dims fall outside 3 sigma for a correct simulator)."""
        outside = round((1.0 - self.frac_mean_within_band) * self.dimension)
        return (self.var_rel_err <= var_tol
                and outside <= max(3, int(0.01 * self.dimension)))

    def summary_line(self) -> str:
        return (
            f"prop1 n={self.n_samples} d={self.dimension} model={self.channel_model} "
            f"tx={self.transmitter_mode} gamma_mode={self.gamma_mode} "
            f"gamma={self.budget.gamma_used:.6g} predicted_var={self.budget.sigma_tot2:.6g} "
            f"pooled_var={self.pooled_var:.6g} var_rel_err={self.var_rel_err:.4%} "
            f"mean_within_3sigma={self.frac_mean_within_band:.4%}"
        )

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("dim,empirical_mean_err,empirical_var,predicted_var,rel_err\n")
        pred_mean = self.budget.mean_coeff * self.z0
        pred_var = self.budget.sigma_tot2
        for j in range(self.dimension):
            err = self.emp_mean[j] - pred_mean[j]
            rel = (self.emp_var[j] - pred_var) / pred_var if pred_var > 0 else np.inf
            out.write(
                f"{j},{err:.12g},{self.emp_var[j]:.12g},{pred_var:.12g},{rel:.12g}\n"
            )
        return out.getvalue()


def validate_prop1(schedule, plan, split: SplitConfig, channel_cfg: ChannelConfig,
                   source, n_samples: int, gamma_mode: str, rng,
                   transmitter_mode: str = "stochastic", denoiser=None,
                   chunk: int = 4096, _index_shift: int = 0) -> Prop1Report:
    """Monte-Carlo check of the noise-budget moments for one source latent.

    Draws z0 once, then simulates n_samples independent runs of: stochastic
    forward to T_F1 (or the deterministic inversion when transmitter_mode is
    ``ddim_inversion``, reported informationally), per-sample or forced-unit
    normalization, channel noise of variance sigma_eff^2 per component, and a
    fresh-noise forward jump to T_F.  ``_index_shift`` is a test hook that
    mis-indexes only the predicted budget, for negative controls.
    """
    if n_samples < 10_000:
        raise ParameterError(f"validator needs n_samples >= 10^4, got {n_samples}")
    if gamma_mode not in GAMMA_MODES:
        raise ParameterError(f"unknown gamma_mode {gamma_mode!r}; expected {GAMMA_MODES}")
    if transmitter_mode not in ("stochastic", "ddim_inversion"):
        raise ParameterError(f"unknown transmitter_mode {transmitter_mode!r}")
    if transmitter_mode == "ddim_inversion" and denoiser is None:
        raise ParameterError("ddim_inversion transmitter mode needs a denoiser")

    d = source.d
    ab = schedule.alpha_bars
    t1 = plan.training_step(split.t_f1)
    tf = plan.training_step(split.t_f)
    r = float(ab[tf] / ab[t1])
    sigma_ch2 = snr_to_noise_var(channel_cfg.snr_db)
    sigma_eff2 = effective_noise_var(sigma_ch2, channel_cfg.model)

    n_chunks = (n_samples + chunk - 1) // chunk
    kids = rng.spawn(1 + n_chunks)
    z0 = gmm_sample(source, 1, kids[0])[0]

    inv_tx = None
    if transmitter_mode == "ddim_inversion" and split.t_f1 > 0:
        inv_tx = run_ddim_invert(
            schedule, Latent(z0, 0), plan.ascending_steps(0, split.t_f1), denoiser
        ).values

    sum_z = []
    sum_z2 = []
    sum_gamma = []
    done = 0
    for c in range(n_chunks):
        m = min(chunk, n_samples - done)
        g = kids[1 + c]
        if inv_tx is not None:
            z_t1 = np.broadcast_to(inv_tx, (m, d))
        else:
            eps1 = g.standard_normal((m, d))
            z_t1 = np.sqrt(ab[t1]) * z0 + np.sqrt(1.0 - ab[t1]) * eps1
        if gamma_mode == "per_sample":
            gamma = 1.0 / np.sqrt(np.mean(z_t1 * z_t1, axis=-1))
        else:
            gamma = np.ones(m)
        y = gamma[:, None] * z_t1 + np.sqrt(sigma_eff2) * g.standard_normal((m, d))
        eps2 = g.standard_normal((m, d))
        z_hat = np.sqrt(r) * y + np.sqrt(1.0 - r) * eps2
        sum_z.append(np.sum(z_hat, axis=0))
        sum_z2.append(np.sum(z_hat * z_hat, axis=0))
        sum_gamma.append(float(np.sum(gamma)))
        done += m

    total = np.sum(np.stack(sum_z), axis=0)
    total2 = np.sum(np.stack(sum_z2), axis=0)
    emp_mean = total / n_samples
    emp_var = (total2 - n_samples * emp_mean * emp_mean) / (n_samples - 1)
    gamma_used = float(np.sum(sum_gamma) / n_samples)

    budget_split = split
    if _index_shift:
        budget_split = SplitConfig(
            min(split.t_f1 + _index_shift, plan.k - split.t_f2), split.t_f2
        )
    budget = compute_noise_budget(schedule, plan, budget_split, gamma_used, sigma_eff2)

    pooled = float(np.mean(emp_var))
    var_rel_err = abs(pooled - budget.sigma_tot2) / budget.sigma_tot2
    band = 3.0 * np.sqrt(budget.sigma_tot2 / n_samples)
    within = np.abs(emp_mean - budget.mean_coeff * z0) <= band
    return Prop1Report(
        n_samples=n_samples,
        dimension=d,
        channel_model=channel_cfg.model,
        sigma_eff2=sigma_eff2,
        gamma_mode=gamma_mode,
        transmitter_mode=transmitter_mode,
        budget=budget,
        z0=z0,
        emp_mean=emp_mean,
        emp_var=emp_var,
        pooled_var=pooled,
        var_rel_err=float(var_rel_err),
        mean_band=float(band),
        frac_mean_within_band=float(np.mean(within)),
    )
