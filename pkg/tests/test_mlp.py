import numpy as np
import pytest

import diffsemcom as dsc
from diffsemcom.errors import ParameterError, TrainingDivergedError
from diffsemcom.mlp import (
    MlpDenoiser,
    TrainConfig,
    glorot_bound,
    init_mlp,
    load_checkpoint,
    loss_and_grads,
    mlp_predict,
    save_checkpoint,
    sgd_step,
    train_denoiser,
)


def test_init_deterministic():
    a = init_mlp(3, 16, 2, dsc.stream(4, 0))
    b = init_mlp(3, 16, 2, dsc.stream(4, 0))
    for x, y in zip(a.arrays(), b.arrays()):
        assert np.array_equal(x, y)


def test_init_within_recomputed_bound():
    params = init_mlp(5, 32, 3, dsc.stream(4, 1), t_emb=16)
    n_in = 5 + 16 + 3
    for w, (fi, fo) in zip(
        (params.w1, params.w2, params.w3), ((n_in, 32), (32, 32), (32, 5))
    ):
        assert np.max(np.abs(w)) <= glorot_bound(fi, fo)
    assert np.all(params.b1 == 0) and np.all(params.b3 == 0)


def test_forward_finite_on_zero_input():
    params = init_mlp(4, 8, 1, dsc.stream(4, 2))
    out = mlp_predict(params, np.zeros(4), 0)
    assert out.shape == (4,)
    assert np.all(np.isfinite(out))


def test_predict_deterministic_and_shapes():
    params = init_mlp(3, 8, 2, dsc.stream(4, 3))
    z = np.random.default_rng(0).standard_normal((5, 3))
    a = mlp_predict(params, z, 100, cond=1)
    b = mlp_predict(params, z, 100, cond=1)
    assert np.array_equal(a, b)
    assert a.shape == (5, 3)
    with pytest.raises(ParameterError):
        mlp_predict(params, np.zeros(4), 100)


def test_gradients_match_finite_differences():
    params = init_mlp(2, 8, 2, dsc.stream(4, 4), t_emb=8)
    rng = np.random.default_rng(1)
    z = rng.standard_normal((4, 2))
    t = rng.integers(1, 1001, size=4)
    target = rng.standard_normal((4, 2))
    _, grads = loss_and_grads(params, z, t, None, target)
    h = 1e-5
    for arr, grad in zip(params.arrays(), grads):
        flat, gflat = arr.ravel(), grad.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp, _ = loss_and_grads(params, z, t, None, target)
            flat[i] = orig - h
            lm, _ = loss_and_grads(params, z, t, None, target)
            flat[i] = orig
            fd = (lp - lm) / (2 * h)
            assert abs(fd - gflat[i]) / max(abs(fd), abs(gflat[i]), 1e-8) < 1e-4


def test_sgd_step_moves_downhill():
    params = init_mlp(2, 8, 1, dsc.stream(4, 5))
    rng = np.random.default_rng(2)
    z = rng.standard_normal((32, 2))
    t = rng.integers(1, 1001, size=32)
    target = rng.standard_normal((32, 2))
    l0, grads = loss_and_grads(params, z, t, None, target)
    sgd_step(params, grads, 0.05)
    l1, _ = loss_and_grads(params, z, t, None, target)
    assert l1 < l0


def test_training_loss_halves(sched):
    src = dsc.GaussianMixtureModel.standard_normal(2)
    params = init_mlp(2, 64, 1, dsc.stream(4, 6))
    # initial smoothed loss: the untrained network on 10 fresh batches
    eval_rng = np.random.default_rng(77)
    init_losses = []
    for _ in range(10):
        z0 = dsc.gmm_sample(src, 256, eval_rng)
        t = eval_rng.integers(1, 1001, size=256)
        eps = eval_rng.standard_normal((256, 2))
        ab = sched.alpha_bars[t][:, None]
        z_t = np.sqrt(ab) * z0 + np.sqrt(1 - ab) * eps
        loss, _ = loss_and_grads(params, z_t, t, None, eps)
        init_losses.append(loss)
    _, trace = train_denoiser(
        params, src, sched,
        TrainConfig(learning_rate=2e-3, batch_size=256, iterations=800, seed=123),
    )
    assert np.mean(trace[-100:]) <= 0.5 * np.mean(init_losses)


def test_zero_learning_rate_keeps_params(sched):
    src = dsc.GaussianMixtureModel.standard_normal(2)
    params = init_mlp(2, 8, 1, dsc.stream(4, 7))
    trained, _ = train_denoiser(
        params, src, sched,
        TrainConfig(learning_rate=0.0, batch_size=16, iterations=20, seed=0),
    )
    for a, b in zip(trained.arrays(), params.arrays()):
        assert np.array_equal(a, b)


def test_training_divergence_raises(sched):
    # the guard fires as soon as the loss goes non-finite
    src = dsc.GaussianMixtureModel.standard_normal(2)
    params = init_mlp(2, 8, 1, dsc.stream(4, 8))
    params.w3[0, 0] = np.nan
    with pytest.raises(TrainingDivergedError) as err:
        train_denoiser(
            params, src, sched,
            TrainConfig(learning_rate=1e-3, batch_size=16, iterations=50, seed=0),
        )
    assert err.value.loss_trace is not None
    assert err.value.loss_trace.size == 0  # diverged on the first iteration


def test_training_bit_reproducible(sched):
    src = dsc.GaussianMixtureModel.standard_normal(2)
    cfg = TrainConfig(learning_rate=1e-3, batch_size=32, iterations=50, seed=9)
    p1, t1 = train_denoiser(init_mlp(2, 8, 1, dsc.stream(4, 9)), src, sched, cfg)
    p2, t2 = train_denoiser(init_mlp(2, 8, 1, dsc.stream(4, 9)), src, sched, cfg)
    assert np.array_equal(t1, t2)
    for a, b in zip(p1.arrays(), p2.arrays()):
        assert np.array_equal(a, b)


def test_checkpoint_round_trip(tmp_path):
    params = init_mlp(3, 8, 2, dsc.stream(4, 10))
    path = tmp_path / "net.ckpt"
    save_checkpoint(params, path)
    loaded = load_checkpoint(path)
    assert loaded.d == 3 and loaded.hidden == 8 and loaded.label_count == 2
    for a, b in zip(loaded.arrays(), params.arrays()):
        assert np.array_equal(a, b)
    z = np.random.default_rng(3).standard_normal(3)
    assert np.array_equal(mlp_predict(loaded, z, 42), mlp_predict(params, z, 42))


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOPE" + b"\x00" * 40)
    with pytest.raises(ParameterError):
        load_checkpoint(path)


def test_denoiser_contract(sched):
    params = init_mlp(2, 8, 1, dsc.stream(4, 11))
    den = MlpDenoiser(params)
    z = np.random.default_rng(5).standard_normal((7, 2))
    out = den.predict(z, 10)
    assert out.shape == z.shape


def test_trained_pipeline_mse_within_factor_two(sched):
    # end-to-end smoke: the trained net's pipeline MSE stays within 2x of
    # the analytic denoiser's on the standard-normal source
    from diffsemcom.channel import ChannelConfig
    from diffsemcom.noise_budget import SplitConfig
    from diffsemcom.pipeline import PipelineConfig, run_trial

    src = dsc.GaussianMixtureModel.standard_normal(2)
    trained, _ = train_denoiser(
        init_mlp(2, 64, 1, dsc.stream(4, 12)), src, sched,
        TrainConfig(learning_rate=2e-3, batch_size=256, iterations=2500, seed=5),
    )
    plan = dsc.make_stride_plan(sched, 50)
    cfg = PipelineConfig(
        split=SplitConfig(5, 5),
        channel=ChannelConfig(5.0, "real_simplified"), t_b="auto",
    )
    mses = {}
    for name, den in (("mlp", MlpDenoiser(trained)),
                      ("analytic", dsc.GmmDenoiser(src, sched))):
        res = run_trial(cfg, src, sched, plan, den, 512, dsc.stream(4, 13))
        mses[name] = res.metrics.mse
    assert mses["mlp"] <= 2.0 * mses["analytic"]
