import numpy as np
import pytest

from influencekit import trainer as tr
from influencekit.datamodel import Sample, gen_class_blobs, gen_separable_noisy
from influencekit.errors import NumericError, UndefinedChangeError
from influencekit.presets import NOISY_GEOMETRY

from conftest import fd_gradient, random_params


def _model_fn(params, sample):
    model = tr._model(params.architecture)
    return lambda theta: model.loss_batch(theta, sample.features[None, :],
                                          np.array([sample.label]))[0]


@pytest.mark.parametrize("config_name", ["logistic_config", "mlp_config"])
def test_gradient_matches_finite_differences(config_name, tiny_blobs, request):
    config = request.getfixturevalue(config_name)
    train, _ = tiny_blobs
    rng = np.random.default_rng(17)
    for trial in range(100):
        params = random_params(config, train.dim, train.num_classes, rng)
        sample = train[int(rng.integers(len(train)))]
        g = tr.loss_gradient(params, sample)
        g_fd = fd_gradient(_model_fn(params, sample), params.theta.copy())
        assert np.allclose(g, g_fd, rtol=1e-4, atol=1e-7)


def test_loss_at_zero_params_is_log_k(tiny_blobs, logistic_config):
    train, _ = tiny_blobs
    params = tr.init_params(logistic_config, train.dim, train.num_classes)
    assert params.theta.sum() == 0.0
    for sample in list(train)[:5]:
        assert tr.loss(params, sample) == pytest.approx(np.log(train.num_classes))


def test_binary_zero_params_loss_is_ln2():
    cfg = tr.ModelConfig(architecture="logistic", seed=0)
    params = tr.init_params(cfg, 2, 2)
    sample = Sample(0, np.array([0.3, -1.2]), 1)
    assert tr.loss(params, sample) == pytest.approx(np.log(2.0), abs=1e-12)


def test_saturated_correct_prediction_has_zero_loss_and_gradient():
    cfg = tr.ModelConfig(architecture="logistic", seed=0)
    base = tr.init_params(cfg, 2, 2)
    # logit gap 800: exp(-800) underflows, so the wrong-class probability
    # is exactly zero and both loss and gradient vanish identically
    theta = np.zeros(6)
    theta[0] = 400.0   # class-0 weight on feature 0
    theta[3] = -400.0  # class-1 weight on feature 0
    params = base.with_theta(theta)
    sample = Sample(0, np.array([1.0, 0.0]), 0)
    assert tr.loss(params, sample) == 0.0
    assert np.all(tr.loss_gradient(params, sample) == 0.0)


def test_dimension_mismatch_rejected(logistic_config, tiny_blobs):
    train, _ = tiny_blobs
    params = tr.init_params(logistic_config, train.dim, train.num_classes)
    with pytest.raises(ValueError, match="feature dim"):
        tr.loss(params, Sample(99, np.array([1.0]), 0))


def test_weighted_gradient_linearity(tiny_blobs, logistic_config):
    train, _ = tiny_blobs
    rng = np.random.default_rng(3)
    params = random_params(logistic_config, train.dim, train.num_classes, rng)
    w = rng.uniform(0.0, 2.0, len(train))
    model = tr._model(params.architecture)
    full = model.weighted_grad(params.theta, train.features, train.labels, w)
    per_sample = tr.per_sample_gradients(params, train)
    assert np.allclose(full, per_sample.T @ w / len(train), atol=1e-12)


def test_train_weighted_neutral_weights_match_unweighted(tiny_blobs,
                                                         logistic_config):
    train, _ = tiny_blobs
    init = tr.init_params(logistic_config, train.dim, train.num_classes)
    a = tr.train_weighted(init, train, np.ones(len(train)), logistic_config, 3)
    b = tr.train(init, train, logistic_config, 3)
    assert np.array_equal(a.theta, b.theta)


def test_train_weighted_zero_weights_no_decay_is_identity(tiny_blobs):
    train, _ = tiny_blobs
    cfg = tr.ModelConfig(architecture="logistic", learning_rate=0.5,
                         weight_decay=0.0, batch_size=8, epochs=1, seed=0)
    init = tr.init_params(cfg, train.dim, train.num_classes)
    start = init.with_theta(init.theta + 0.25)
    out = tr.train_weighted(start, train, np.zeros(len(train)), cfg, 1)
    assert np.array_equal(out.theta, start.theta)
    assert out.epoch_index == start.epoch_index + 1


def test_constant_weights_rescale_learning_rate(tiny_blobs):
    train, _ = tiny_blobs
    c = 1.7
    base = dict(architecture="logistic", weight_decay=0.0,
                batch_size=len(train), epochs=1, seed=0)
    cfg = tr.ModelConfig(learning_rate=0.2, **base)
    cfg_scaled = tr.ModelConfig(learning_rate=0.2 * c, **base)
    init = tr.init_params(cfg, train.dim, train.num_classes)
    start = init.with_theta(init.theta + 0.1)
    weighted = tr.train_weighted(start, train, np.full(len(train), c), cfg, 1)
    rescaled = tr.train_weighted(start, train, np.ones(len(train)), cfg_scaled, 1)
    assert np.allclose(weighted.theta, rescaled.theta, atol=1e-12)


def test_training_deterministic(tiny_blobs, mlp_config):
    train, _ = tiny_blobs
    init = tr.init_params(mlp_config, train.dim, train.num_classes)
    w = np.linspace(0.5, 1.5, len(train))
    a = tr.train_weighted(init, train, w, mlp_config, 5)
    b = tr.train_weighted(init, train, w, mlp_config, 5)
    assert np.array_equal(a.theta, b.theta)


def test_epoch_replay_matches_stacked_training(tiny_blobs, logistic_config):
    # training 2+3 epochs in two calls equals 5 epochs in one call
    train, _ = tiny_blobs
    init = tr.init_params(logistic_config, train.dim, train.num_classes)
    w = np.ones(len(train))
    first = tr.train_weighted(init, train, w, logistic_config, 2)
    resumed = tr.train_weighted(first, train, w, logistic_config, 3)
    oneshot = tr.train_weighted(init, train, w, logistic_config, 5)
    assert np.array_equal(resumed.theta, oneshot.theta)


def test_weight_length_mismatch(tiny_blobs, logistic_config):
    train, _ = tiny_blobs
    init = tr.init_params(logistic_config, train.dim, train.num_classes)
    with pytest.raises(ValueError, match="weight vector"):
        tr.train_weighted(init, train, np.ones(len(train) + 1),
                          logistic_config, 1)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_reports_numeric_error(tiny_blobs):
    train, _ = tiny_blobs
    cfg = tr.ModelConfig(architecture="logistic", learning_rate=1e12,
                         weight_decay=0.5, batch_size=4, epochs=3, seed=0)
    init = tr.init_params(cfg, train.dim, train.num_classes)
    with pytest.raises(NumericError):
        tr.train_weighted(init, train, np.ones(len(train)), cfg, 3)


def test_evaluate_perfect_and_constant_classifiers(tiny_blobs):
    _, val = tiny_blobs
    cfg = tr.ModelConfig(architecture="logistic", seed=0)
    base = tr.init_params(cfg, val.dim, val.num_classes)
    # constant classifier: huge bias toward class 0
    theta = np.zeros(len(base.theta))
    theta[val.dim] = 100.0  # class-0 bias column
    metrics = tr.evaluate_per_class(base.with_theta(theta), val)
    assert metrics.per_class_accuracy[0] == 1.0
    assert (metrics.per_class_accuracy[1:] == 0.0).all()


def test_evaluate_matches_hand_counted_confusion():
    # 10 samples, predictions worked out by hand from the fixed parameters
    feats = np.array([[1.0, 0.0], [0.9, 0.1], [0.8, -0.2], [2.0, 0.0],
                      [-1.0, 0.0], [-0.5, 0.2], [-2.0, 0.4], [0.1, 0.0],
                      [-0.1, 0.0], [3.0, 1.0]])
    labels = np.array([0, 0, 0, 0, 1, 1, 1, 1, 1, 1])
    from influencekit.datamodel import Dataset
    ds = Dataset(np.arange(10), feats, labels, num_classes=2)
    cfg = tr.ModelConfig(architecture="logistic", bias=False, seed=0)
    params = tr.init_params(cfg, 2, 2).with_theta(
        np.array([1.0, 0.0, -1.0, 0.0]))  # predicts 0 iff x0 > 0
    metrics = tr.evaluate_per_class(params, ds)
    # class 0: all four have x0 > 0 -> 4/4; class 1: x0 < 0 for 4 of 6
    assert metrics.per_class_accuracy[0] == pytest.approx(1.0)
    assert metrics.per_class_accuracy[1] == pytest.approx(4.0 / 6.0)
    assert metrics.overall_accuracy == pytest.approx(8.0 / 10.0)


def test_overall_accuracy_is_sample_weighted_mean(tiny_blobs, logistic_config):
    train, val = tiny_blobs
    params = tr.train(tr.init_params(logistic_config, train.dim,
                                     train.num_classes), train, logistic_config)
    m = tr.evaluate_per_class(params, val)
    counts = np.bincount(val.labels, minlength=val.num_classes)
    weighted = (m.per_class_accuracy * counts).sum() / counts.sum()
    assert m.overall_accuracy == pytest.approx(weighted, abs=1e-12)


def test_relative_change_table_values():
    # printed changes from the reference DI/CC runs: +16.02% and +2.77%
    old = tr.EpochMetrics(np.array([0.699, 0.864]), 0.78, 10)
    new = tr.EpochMetrics(np.array([0.811, 0.888]), 0.85, 11)
    delta = tr.relative_change(old, new)
    assert delta.delta[0] == pytest.approx(0.1602, abs=1e-4)
    assert delta.delta[1] == pytest.approx(0.0277, abs=1e-4)
    assert delta.as_percent()[0] == pytest.approx(16.02, abs=1e-2)


def test_relative_change_identity_and_zero_baseline():
    m = tr.EpochMetrics(np.array([0.5, 0.75]), 0.6, 1)
    assert np.all(tr.relative_change(m, m).delta == 0.0)
    zero = tr.EpochMetrics(np.array([0.0, 0.75]), 0.4, 1)
    with pytest.raises(UndefinedChangeError, match="classes \\[0\\]"):
        tr.relative_change(zero, m)


def test_monotone_sanity_separable_reaches_high_accuracy():
    train = gen_separable_noisy(150, 150, 0, 0, seed=2, geometry=NOISY_GEOMETRY)
    val = gen_separable_noisy(300, 300, 0, 0, seed=1002,
                              geometry=NOISY_GEOMETRY, split_tag="validation")
    cfg = tr.ModelConfig(architecture="logistic", learning_rate=0.4,
                         weight_decay=1e-3, batch_size=64, epochs=60, seed=2)
    params = tr.train(tr.init_params(cfg, 2, 2), train, cfg)
    acc = tr.evaluate_per_class(params, val).per_class_accuracy
    assert (acc >= 0.99).all()


def test_checkpoint_round_trip(tmp_path, tiny_blobs, mlp_config):
    train, _ = tiny_blobs
    params = tr.train(tr.init_params(mlp_config, train.dim, train.num_classes),
                      train, mlp_config, 3)
    path = tmp_path / "ckpt.json"
    tr.save_params(params, path)
    loaded = tr.load_params(path)
    assert np.array_equal(loaded.theta, params.theta)
    assert loaded.architecture == params.architecture
    assert loaded.epoch_index == params.epoch_index
