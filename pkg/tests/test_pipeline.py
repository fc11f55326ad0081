import numpy as np
import pytest

import diffsemcom as dsc
from diffsemcom.channel import ChannelConfig
from diffsemcom.errors import ConfigError
from diffsemcom.noise_budget import SplitConfig
from diffsemcom.pipeline import (
    PipelineConfig,
    encode_transmit,
    receive_decode,
    run_baseline_random_noise,
    run_trial,
)

QUIET = ChannelConfig(400.0, "real_simplified")  # effectively noiseless
AT5 = ChannelConfig(5.0, "real_simplified")


def test_encode_tf1_zero_is_normalized_source(sched, plan50, std_normal_8):
    cfg = PipelineConfig(split=SplitConfig(0, 5), channel=AT5)
    den = dsc.GmmDenoiser(std_normal_8, sched)
    z0 = dsc.gmm_sample(std_normal_8, 4, dsc.stream(1, 0))
    sig, gamma = encode_transmit(z0, cfg, sched, plan50, den, dsc.stream(1, 1))
    ref = dsc.power_normalize(z0)
    assert np.array_equal(sig.values, ref.values)
    assert np.array_equal(gamma, ref.gamma)


def test_encode_zero_denoiser_matches_normalized_source(sched, plan50, std_normal_8):
    # a zero prediction makes inversion a pure scaling, which normalization
    # absorbs: transmitted values equal the normalized source
    cfg = PipelineConfig(split=SplitConfig(5, 0), channel=AT5)
    z0 = dsc.gmm_sample(std_normal_8, 4, dsc.stream(1, 2))
    sig, _ = encode_transmit(z0, cfg, sched, plan50, dsc.ConstantDenoiser(0.0),
                             dsc.stream(1, 3))
    assert np.allclose(sig.values, dsc.power_normalize(z0).values, rtol=1e-12)


def test_encode_power_matches_forward_monte_carlo(sched, plan50):
    # the inverted latent's average power tracks the stochastic-forward
    # power at the same step within 10%
    model = dsc.GaussianMixtureModel.standard_normal(256)
    den = dsc.GmmDenoiser(model, sched)
    z0 = dsc.gmm_sample(model, 128, dsc.stream(1, 4))
    inverted = dsc.run_ddim_invert(
        sched, dsc.Latent(z0, 0), plan50.ascending_steps(0, 5), den
    ).values
    forward = dsc.forward_reparam(
        sched, dsc.Latent(z0, 0), plan50.training_step(5), dsc.stream(1, 40)
    ).values
    mc_power = float(np.mean(forward**2))
    assert abs(np.mean(inverted**2) / mc_power - 1.0) < 0.1
    assert abs(mc_power - 1.0) < 0.05  # standard normal is stationary


def test_receive_decode_exact_inverse(sched, plan50):
    # constant denoiser, no channel noise, T_F2 = 0, T_B = T_F1
    rng = dsc.stream(1, 5)
    z0 = rng.standard_normal(8)
    den = dsc.ConstantDenoiser(rng.standard_normal(8))
    y = dsc.run_ddim_invert(sched, dsc.Latent(z0, 0), plan50.ascending_steps(0, 5), den).values
    cfg = PipelineConfig(split=SplitConfig(5, 0), channel=QUIET, t_b=5)
    out = receive_decode(y, cfg, sched, plan50, den, dsc.stream(1, 6))
    assert np.max(np.abs(out - z0)) <= 1e-12


def test_receive_decode_gamma_consistent_round_trip(sched, plan50):
    # GMM denoiser through the whole encoder (with normalization): the
    # decoder recovers gamma * z0 since no de-normalization is applied
    d = 1024
    src = dsc.GaussianMixtureModel(
        np.array([0.5, 0.5]),
        np.vstack([np.full(d, 0.8), np.full(d, -0.8)]),
        np.full((2, d), 0.36),
    )
    den = dsc.GmmDenoiser(src, sched)
    cfg = PipelineConfig(split=SplitConfig(5, 0), channel=ChannelConfig(300.0, "complex_paper"), t_b=5)
    z0 = dsc.gmm_sample(src, 8, dsc.stream(1, 7))
    sig, gamma = encode_transmit(z0, cfg, sched, plan50, den, dsc.stream(1, 8))
    out = receive_decode(sig.values, cfg, sched, plan50, den, dsc.stream(1, 9))
    ref = gamma[:, None] * z0
    rel = np.sum((out - ref) ** 2, axis=-1) / np.sum(ref**2, axis=-1)
    assert np.max(rel) < 1e-2


def test_receive_decode_t_b_zero_only_for_empty_split(sched, plan50, std_normal_8):
    den = dsc.GmmDenoiser(std_normal_8, sched)
    y = np.ones(8)
    cfg0 = PipelineConfig(split=SplitConfig(0, 0), channel=QUIET, t_b=0)
    assert np.array_equal(receive_decode(y, cfg0, sched, plan50, den, dsc.stream(1, 10)), y)
    cfg_bad = PipelineConfig(split=SplitConfig(5, 0), channel=QUIET, t_b=0)
    with pytest.raises(ConfigError):
        receive_decode(y, cfg_bad, sched, plan50, den, dsc.stream(1, 11))


def test_run_trial_deterministic(sched, plan50, bimodal_64):
    den = dsc.GmmDenoiser(bimodal_64, sched)
    cfg = PipelineConfig(split=SplitConfig(5, 5), channel=AT5, t_b="auto")
    a = run_trial(cfg, bimodal_64, sched, plan50, den, 64, dsc.stream(1, 12))
    b = run_trial(cfg, bimodal_64, sched, plan50, den, 64, dsc.stream(1, 12))
    assert a.metrics == b.metrics
    assert a.t_b_resolved == b.t_b_resolved
    assert np.array_equal(a.record.z_tilde0, b.record.z_tilde0)


def test_degenerate_channel_identity(sched, plan50):
    # sigma_ch^2 = 0, zero-constant denoiser, T_F2 = 0, T_B = T_F1: the
    # decoded latent equals gamma * z0 exactly (no de-normalization exists)
    src = dsc.GaussianMixtureModel.standard_normal(16)
    den = dsc.ConstantDenoiser(0.0)
    cfg = PipelineConfig(split=SplitConfig(5, 0), channel=QUIET, t_b=5,
                         transmitter_mode="ddim_inversion")
    res = run_trial(cfg, src, sched, plan50, den, 16, dsc.stream(1, 13))
    ref = res.record.gamma[:, None] * res.record.z0
    assert np.max(np.abs(res.record.z_tilde0 - ref)) <= 1e-12


def test_snr_ordering_median_mse(sched, plan50, bimodal_64):
    den = dsc.GmmDenoiser(bimodal_64, sched)
    lo, hi = [], []
    for seed in range(20):
        for target, snr in ((lo, 0.0), (hi, 20.0)):
            cfg = PipelineConfig(
                split=SplitConfig(5, 5),
                channel=ChannelConfig(snr, "real_simplified"), t_b="auto",
            )
            res = run_trial(cfg, bimodal_64, sched, plan50, den, 64, dsc.stream(1, 100 + seed))
            target.append(res.metrics.mse)
    assert np.median(hi) < np.median(lo)


def test_sw2_median_decreases_along_snr_for_unit_power_source(sched, plan50):
    # for a unit-power source the decoded distribution approaches the
    # source as SNR grows
    src = dsc.GaussianMixtureModel.standard_normal(64)
    den = dsc.GmmDenoiser(src, sched)
    medians = []
    for snr in (0.0, 10.0, 20.0):
        cfg = PipelineConfig(
            split=SplitConfig(5, 5),
            channel=ChannelConfig(snr, "real_simplified"), t_b="auto",
        )
        vals = [
            run_trial(cfg, src, sched, plan50, den, 128, dsc.stream(1, 200 + seed)).metrics.sw2
            for seed in range(8)
        ]
        medians.append(np.median(vals))
    assert medians[0] > medians[1] > medians[2]


def test_paper_analog_t_b_exceeds_t_f_at_0db(sched, plan50, bimodal_64):
    den = dsc.GmmDenoiser(bimodal_64, sched)
    cfg = PipelineConfig(split=SplitConfig(5, 5),
                         channel=ChannelConfig(0.0, "complex_paper"), t_b="auto")
    res = run_trial(cfg, bimodal_64, sched, plan50, den, 64, dsc.stream(1, 14))
    assert res.t_b_resolved > 10


def test_receiver_forward_modes_both_work(sched, plan50, bimodal_64):
    den = dsc.GmmDenoiser(bimodal_64, sched)
    outs = {}
    for mode in ("ddim_inversion", "stochastic"):
        cfg = PipelineConfig(split=SplitConfig(5, 5), channel=AT5, t_b="auto",
                             receiver_forward_mode=mode)
        res = run_trial(cfg, bimodal_64, sched, plan50, den, 32, dsc.stream(1, 15))
        outs[mode] = res.metrics.mse
    assert all(np.isfinite(v) for v in outs.values())
    assert outs["ddim_inversion"] != outs["stochastic"]


def test_condition_receiver_forward_flag_changes_result(sched, plan50, bimodal_64):
    den = dsc.GmmDenoiser(bimodal_64, sched)
    res = {}
    for flag in (False, True):
        cfg = PipelineConfig(
            split=SplitConfig(5, 5), channel=AT5, t_b="auto",
            guidance=dsc.GuidanceConfig(w=1.0, cond=0),
            condition_receiver_forward=flag,
        )
        out = run_trial(cfg, bimodal_64, sched, plan50, den, 32, dsc.stream(1, 16))
        res[flag] = out.record.z_tilde0
    assert not np.array_equal(res[False], res[True])


def test_baseline_trivial_recovery_and_determinism(sched, plan50, bimodal_64):
    den = dsc.GmmDenoiser(bimodal_64, sched)
    cfg = PipelineConfig(split=SplitConfig(0, 0), channel=QUIET, t_b=0)
    a = run_baseline_random_noise(cfg, bimodal_64, sched, plan50, den, 16, dsc.stream(1, 17))
    b = run_baseline_random_noise(cfg, bimodal_64, sched, plan50, den, 16, dsc.stream(1, 17))
    ref = a.record.gamma[:, None] * a.record.z0
    assert np.max(np.abs(a.record.z_tilde0 - ref)) < 1e-12
    assert np.array_equal(a.record.z_tilde0, b.record.z_tilde0)


def test_baseline_shares_source_draws_with_proposed(sched, plan50, bimodal_64):
    den = dsc.GmmDenoiser(bimodal_64, sched)
    cfg = PipelineConfig(split=SplitConfig(5, 5), channel=AT5, t_b="auto")
    a = run_trial(cfg, bimodal_64, sched, plan50, den, 32, dsc.stream(1, 18))
    b = run_baseline_random_noise(cfg, bimodal_64, sched, plan50, den, 32, dsc.stream(1, 18))
    assert np.array_equal(a.record.z0, b.record.z0)


def test_record_per_sample_rows(sched, plan50, bimodal_64):
    den = dsc.GmmDenoiser(bimodal_64, sched)
    cfg = PipelineConfig(split=SplitConfig(5, 5), channel=AT5, t_b="auto")
    res = run_trial(cfg, bimodal_64, sched, plan50, den, 8, dsc.stream(1, 19))
    rows = res.record.per_sample_rows()
    assert len(rows) == 8
    assert all(len(r) == 3 and r[1] > 0 and r[2] >= 0 for r in rows)
