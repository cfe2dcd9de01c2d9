import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.spatial.transform import Rotation

from strnet.body import load_body_model
from strnet.config import RunConfig
from strnet.model import Prediction
from strnet.numerics import NumericError, Tensor, as_tensor, grad_check
from strnet.training import (Adam, AdamState, Dataset, LossWeights, PlateauScheduler, SynthConfig,
                             accel_error, adam_step, gen_synthetic_dataset, loss_lg, lr_schedule,
                             mpjpe, mpvpe, pa_mpjpe)
from strnet.training.metrics import similarity_align
from strnet.training.optim import FACTOR, INITIAL_LR, PATIENCE
from strnet.training.synth import feature_embedding
from strnet.training.trainer import (Trainer, build_model, evaluate, evaluate_predictions,
                                     oracle_predictions, sequence_runs, synth_config)


@pytest.fixture
def rng():
    return np.random.default_rng(17)


def random_similarity(rng):
    R = Rotation.random(random_state=rng.integers(1 << 31)).as_matrix()
    return R, rng.uniform(0.5, 2.0), rng.normal(size=3)


# -- loss ------------------------------------------------------------------------------

def fake_pred(j3, j2, th, be):
    cam, verts = Tensor(np.array([1.0, 0, 0])), Tensor(np.zeros((1, 3)))
    return Prediction(as_tensor(th), as_tensor(be), cam, verts, as_tensor(j3), as_tensor(j2))


def gt_dict(j3, j2, th, be):
    return {"joints3d": j3, "joints2d": j2, "theta": th, "beta": be}


def test_loss_zero_at_gt(rng):
    arrs = rng.normal(size=(4, 3)), rng.normal(size=(4, 2)), rng.normal(size=(4, 3)), rng.normal(size=10)
    total, _ = loss_lg(fake_pred(*arrs), gt_dict(*arrs), LossWeights())
    assert total.item() == 0.0


def test_loss_zero_weights(rng):
    a = rng.normal(size=(4, 3)), rng.normal(size=(4, 2)), rng.normal(size=(4, 3)), rng.normal(size=10)
    b = tuple(x + 1 for x in a)
    assert loss_lg(fake_pred(*a), gt_dict(*b), LossWeights(0, 0, 0, 0))[0].item() == 0.0


def test_loss_three_four_five():
    z3, z2, zb = np.zeros((2, 3)), np.zeros((2, 2)), np.zeros(10)
    gt = z3.copy()
    gt[1] = [3.0, 4.0, 0.0]
    total, terms = loss_lg(fake_pred(z3, z2, z3, zb), gt_dict(gt, z2, z3, zb), LossWeights(1, 0, 0, 0))
    assert total.item() == pytest.approx(5.0, abs=1e-15)
    assert terms["3d"] == pytest.approx(5.0)


def test_loss_positive_iff_residual(rng):
    a = [rng.normal(size=(4, 3)), rng.normal(size=(4, 2)), rng.normal(size=(4, 3)), rng.normal(size=10)]
    for i in range(4):
        b = [x.copy() for x in a]
        b[i].flat[0] += 1e-3
        assert loss_lg(fake_pred(*a), gt_dict(*b), LossWeights())[0].item() > 0


def test_loss_gradients(rng):
    pts = [Tensor(rng.normal(size=s)) for s in ((2, 4, 3), (2, 4, 2), (2, 4, 3), (2, 10))]
    gt = gt_dict(*(rng.normal(size=p.shape) for p in pts))
    res = grad_check(lambda *p: loss_lg(fake_pred(*p), gt, LossWeights(1.0, 0.5, 0.2, 2.0))[0], pts)
    assert res.max_rel_error < 1e-4, str(res)


def test_loss_negative_weight_rejected():
    with pytest.raises(ValueError):
        LossWeights(w_3d=-1.0)


# -- adam ------------------------------------------------------------------------------

def test_adam_zero_grad_is_noop(rng):
    p = [rng.normal(size=(3, 2))]
    new, st_ = adam_step(p, [np.zeros((3, 2))], AdamState(), 1e-3)
    np.testing.assert_array_equal(new[0], p[0])
    assert not st_.m[0].any() and not st_.v[0].any()


def test_adam_first_step_is_signed_lr(rng):
    p, g = rng.normal(size=20), rng.normal(size=20)
    new, _ = adam_step([p], [g], AdamState(), 5e-5)
    np.testing.assert_allclose(new[0] - p, -5e-5 * np.sign(g), rtol=1e-6)


def test_adam_two_steps_hand_unrolled(rng):
    p, g1, g2 = rng.normal(size=5), rng.normal(size=5), rng.normal(size=5)
    lr, b1, b2, eps = 1e-2, 0.9, 0.999, 1e-8
    out, s = adam_step([p], [g1], AdamState(), lr)
    out, s = adam_step(out, [g2], s, lr)
    m1, v1 = (1 - b1) * g1, (1 - b2) * g1 ** 2
    x = p - lr * (m1 / (1 - b1)) / (np.sqrt(v1 / (1 - b2)) + eps)
    m2, v2 = b1 * m1 + (1 - b1) * g2, b2 * v1 + (1 - b2) * g2 ** 2
    x = x - lr * (m2 / (1 - b1 ** 2)) / (np.sqrt(v2 / (1 - b2 ** 2)) + eps)
    np.testing.assert_array_equal(out[0], x)
    assert s.step == 2


def test_adam_rejects_nonfinite():
    with pytest.raises(NumericError):
        adam_step([np.zeros(2)], [np.array([np.inf, 0.0])], AdamState(), 1e-3)


def test_adam_optimizer_updates_tensors():
    t = Tensor(np.array([1.0, -1.0]), requires_grad=True)
    opt = Adam([t], lr=0.1)
    (t * t).sum().backward()
    opt.step()
    np.testing.assert_allclose(t.data, [0.9, -0.9])


# -- schedule ----------------------------------------------------------------------------

def test_schedule_constants():
    assert (INITIAL_LR, PATIENCE, FACTOR) == (5e-5, 5, 10.0)


def test_monotone_improvement_keeps_lr():
    hist = list(np.linspace(1, 0.1, 20))
    assert all(lr_schedule(hist[:i + 1], 5e-5) == 5e-5 for i in range(20))


def test_five_stagnant_epochs_divide_by_ten():
    hist = [1.0, 0.5] + [0.7] * 5
    assert lr_schedule(hist[:6], 5e-5) == 5e-5
    assert lr_schedule(hist, 5e-5) == pytest.approx(5e-6, rel=1e-15)


def test_improvement_resets_counter():
    hist = [1.0, 1.1, 1.2, 1.3, 0.9, 1.0, 1.0, 1.0]
    assert lr_schedule(hist, 5e-5) == 5e-5


def test_plateau_scheduler_matches_function(rng):
    hist = list(rng.choice([0.5, 0.4, 0.6, 0.3], size=40))
    sched, lr = PlateauScheduler(), INITIAL_LR
    for i, x in enumerate(hist):
        lr = lr_schedule(hist[:i + 1], lr)
        assert sched.update(x) == lr


# -- metrics -----------------------------------------------------------------------------

def test_metrics_zero_at_gt(rng):
    j = rng.normal(size=(5, 6, 3))
    assert mpjpe(j, j) == 0.0 and mpvpe(j, j) == 0.0 and accel_error(j, j) == 0.0
    assert pa_mpjpe(j, j) < 1e-12


def test_pa_removes_similarity(rng):
    for _ in range(20):
        gt = rng.normal(size=(6, 3))
        R, s, t = random_similarity(rng)
        pred = s * gt @ R.T + t
        assert pa_mpjpe(pred, gt) < 1e-8
        assert mpjpe(pred, gt) > 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_pa_not_above_mpjpe(seed):
    rng = np.random.default_rng(seed)
    gt = rng.normal(size=(6, 3))
    pred = gt + rng.normal(size=(6, 3)) * rng.uniform(0.01, 1.0)
    assert pa_mpjpe(pred, gt) <= mpjpe(pred, gt) + 1e-12


def test_pa_beats_grid_search(rng):
    """Two joints in the plane: closed form vs. dense rotation/scale grid."""
    gt = np.array([[0.0, 0.0, 0.0], [1.0, 0.3, 0.0]])
    pred = np.array([[0.2, -0.1, 0.0], [0.1, 0.9, 0.0]])
    best = np.inf
    p0, g0 = pred - pred.mean(0), gt - gt.mean(0)
    for ang in np.linspace(-np.pi, np.pi, 721):
        R = expm(np.array([[0, -ang, 0], [ang, 0, 0], [0, 0, 0]]))
        for s in np.linspace(0.1, 3.0, 300):
            best = min(best, np.linalg.norm(s * p0 @ R.T - g0, axis=1).mean())
    assert pa_mpjpe(pred, gt) <= best + 1e-12


def test_similarity_align_handles_reflection_case(rng):
    gt = rng.normal(size=(6, 3))
    pred = gt * np.array([1.0, 1.0, -1.0])
    aligned = similarity_align(pred, gt)
    assert np.isfinite(aligned).all()


def test_accel_constant_velocity_is_zero(rng):
    # dyadic values keep every second difference exact in floating point
    t = np.arange(10.0)[:, None, None]
    dy = lambda: rng.integers(-64, 64, size=(1, 4, 3)) / 8.0  # noqa: E731
    assert accel_error(dy() + t * dy(), dy() + t * dy()) == 0.0
    real = rng.normal(size=(1, 4, 3)) + t * rng.normal(size=(1, 4, 3))
    assert accel_error(real, np.zeros_like(real)) < 1e-13


def test_accel_needs_three_frames(rng):
    with pytest.raises(ValueError):
        accel_error(np.zeros((2, 4, 3)), np.zeros((2, 4, 3)))


def test_mpjpe_is_root_aligned(rng):
    gt = rng.normal(size=(6, 3))
    assert mpjpe(gt + 5.0, gt) == pytest.approx(0.0, abs=1e-14)


# -- synthetic data ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def body():
    return load_body_model()


def small_cfg(**kw):
    base = dict(num_sequences=3, frames_per_seq=20, window=16, channels=64, noise_std=0.05,
                dropout_prob=0.5, dropout_len=4)
    base.update(kw)
    return SynthConfig(**base)


def test_same_seed_bit_identical(body):
    a = gen_synthetic_dataset(7, body, small_cfg())
    b = gen_synthetic_dataset(7, body, small_cfg())
    for k in Dataset.ARRAYS:
        assert getattr(a, k).tobytes() == getattr(b, k).tobytes()


def test_linear_probe_recovers_joints(body):
    ds = gen_synthetic_dataset(3, body, small_cfg(noise_std=0.0, dropout_prob=0.0))
    E = feature_embedding(body.num_joints, 64, 0)
    X = ds.features.reshape(-1, 64)
    coef, *_ = np.linalg.lstsq(E.T, X.T, rcond=None)  # signal = features @ pinv(E)
    j3 = coef.T[:, :18].reshape(ds.joints3d.shape)
    assert np.abs(j3 - ds.joints3d).max() < 1e-6


def test_dropout_span_length(body):
    ds = gen_synthetic_dataset(1, body, small_cfg(noise_std=0.0, dropout_prob=1.0))
    assert np.all(ds.dropout.sum(axis=1) == 4)
    dropped = ds.dropout.astype(bool)
    assert not ds.features[dropped].any()
    assert np.all(np.abs(ds.features[~dropped]).sum(-1) > 0)
    for row in ds.dropout:
        idx = np.flatnonzero(row)
        assert idx[-1] - idx[0] == 3


def test_window_layout(body):
    ds = gen_synthetic_dataset(2, body, small_cfg(dropout_prob=0.0))
    assert len(ds) == 3 * 5
    assert ds.features.shape == (15, 16, 64)
    np.testing.assert_array_equal(ds.frame[:5], np.arange(8, 13))
    np.testing.assert_array_equal(ds.joints3d[1, :-1], ds.joints3d[0, 1:])


def test_empty_dataset_roundtrip(tmp_path, body):
    ds = gen_synthetic_dataset(0, body, small_cfg(num_sequences=0))
    assert len(ds) == 0
    ds.save(tmp_path / "e.bin")
    assert len(Dataset.load(tmp_path / "e.bin")) == 0


def test_short_sequences_rejected(body):
    with pytest.raises(ValueError, match="window length"):
        gen_synthetic_dataset(0, body, small_cfg(frames_per_seq=10))


def test_sequence_runs(body):
    ds = gen_synthetic_dataset(2, body, small_cfg())
    runs = sequence_runs(ds.subset([0, 1, 3, 4, 5, 9]))
    assert [r.tolist() for r in runs] == [[0, 1], [2, 3], [4], [5]]


# -- trainer -----------------------------------------------------------------------------

def tiny_cfg() -> RunConfig:
    cfg = RunConfig(T=8, C=8)
    cfg.body.joints, cfg.body.vertices = 4, 12
    cfg.data.num_sequences, cfg.data.frames_per_seq = 2, 12
    cfg.optim.batch_size = 4
    return cfg.validate()


@pytest.fixture(scope="module")
def tiny():
    cfg = tiny_cfg()
    from strnet.training.trainer import body_from_config
    return cfg, gen_synthetic_dataset(0, body_from_config(cfg), synth_config(cfg))


def test_oracle_predictions_score_zero(tiny):
    _, ds = tiny
    rep = evaluate_predictions(oracle_predictions(ds), ds)
    assert rep.mpjpe == 0 and rep.mpvpe == 0 and rep.accel_err == 0 and rep.pa_mpjpe < 1e-12


def test_empty_eval_is_error(tiny):
    _, ds = tiny
    with pytest.raises(ValueError):
        evaluate(build_model(tiny[0]), ds.subset([]))


def test_small_lr_decreases_loss(tiny):
    cfg, ds = tiny
    cfg = tiny_cfg()
    cfg.optim.lr = 1e-6
    tr = Trainer(build_model(cfg), cfg)
    idx = np.arange(4)
    losses = [tr.step(ds, idx)[0] for _ in range(10)]
    assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_zero_epochs_checkpoint_equals_init(tmp_path, tiny):
    cfg, ds = tiny
    model = build_model(cfg)
    init = {k: v.copy() for k, v in model.state_dict().items()}
    tr = Trainer(model, cfg)
    tr.fit(ds, 0)
    tr.save(tmp_path / "c.bin")
    back, variant = Trainer.load(tmp_path / "c.bin")
    assert variant == "full" and back.epoch == 0
    for k, v in back.model.state_dict().items():
        np.testing.assert_array_equal(v, init[k])


def test_resume_continues_bit_identically(tmp_path, tiny):
    cfg, ds = tiny
    straight = Trainer(build_model(cfg), cfg)
    straight.fit(ds, 2)
    first = Trainer(build_model(cfg), cfg)
    first.fit(ds, 1)
    first.save(tmp_path / "c.bin")
    resumed, _ = Trainer.load(tmp_path / "c.bin")
    logs = resumed.fit(ds, 1)
    assert logs[0].epoch == 2
    for (k, a), b in zip(straight.model.state_dict().items(), resumed.model.state_dict().values()):
        assert a.tobytes() == b.tobytes(), k


def test_training_is_deterministic(tiny):
    cfg, ds = tiny
    runs = []
    for _ in range(2):
        tr = Trainer(build_model(cfg), cfg)
        runs.append([log.row() for log in tr.fit(ds, 2)])
    assert runs[0] == runs[1]


def test_supervise_all_frames(tiny):
    cfg, ds = tiny
    cfg = tiny_cfg()
    cfg.loss.supervise_all = True
    total, _ = Trainer(build_model(cfg), cfg).loss(ds, np.arange(3))
    assert np.isfinite(total.item()) and total.item() > 0
