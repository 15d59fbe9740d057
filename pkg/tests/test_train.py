import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_input
from quencode.encoders import EncodedInput
from quencode.errors import ConfigError, MetricsError
from quencode.model import ClassModel, swap_test
from quencode.train import (
    GradientMethod,
    TrainConfig,
    accuracy,
    batch_gradient,
    bce_loss,
    entropy,
    evaluate,
    fidelity_gradient,
    metrics_from_fidelities,
    train_class,
)


def test_bce_examples():
    assert bce_loss(1, 1.0) == pytest.approx(0.0, abs=1e-11)
    assert bce_loss(1, 0.5) == pytest.approx(math.log(2))
    assert bce_loss(0, 0.9) == pytest.approx(-math.log(0.1))
    assert math.isfinite(bce_loss(1, 0.0))


@settings(max_examples=100)
@given(st.floats(0.001, 0.998), st.floats(0.0005, 0.001))
def test_bce_strictly_decreasing(p, dp):
    assert bce_loss(1, p + dp) < bce_loss(1, p)


def test_entropy_examples():
    assert entropy([0.5, 0.5]) == pytest.approx(math.log(2))
    assert entropy([1.0, 0.0]) == 0.0
    assert entropy([0.9, 0.1]) == pytest.approx(0.3250829733914482)
    with pytest.raises(MetricsError):
        entropy([0.6, 0.6])


@settings(max_examples=100)
@given(st.floats(0, 1))
def test_entropy_symmetric_and_bounded(p):
    assert entropy([p, 1 - p]) == pytest.approx(entropy([1 - p, p]))
    assert entropy([p, 1 - p]) <= math.log(2) + 1e-9


def test_accuracy_examples():
    assert accuracy(["3", "6"], ["3", "6"]) == 1.0
    assert accuracy(["3", "6"], ["6", "3"]) == 0.0
    assert accuracy(["3"] * 109 + ["6"] * 78, ["3"] * 187) == pytest.approx(109 / 187)
    with pytest.raises(MetricsError):
        accuracy([], [])


def test_shift_rule_matches_finite_difference(rng):
    worst = 0.0
    for i in range(100):
        layers = "dual,entangle:cry,single" if i % 4 == 0 else "dual,entangle:cz,single"
        m = ClassModel.random("3", rng, layers)
        s = random_input(rng, ["basis", "rotation", "amplitude"][i % 3])
        k = int(rng.integers(m.num_params))
        ps = fidelity_gradient(m, s, k, GradientMethod.PARAMETER_SHIFT)
        fd = fidelity_gradient(m, s, k, GradientMethod.FINITE_DIFFERENCE)
        worst = max(worst, abs(ps - fd))
    assert worst < 1e-5


def test_gradient_zero_at_optimum():
    # model state |00> against basis 0: fidelity 1 is a maximum
    m = ClassModel("3", params=np.zeros(6))
    s = EncodedInput("basis", 0)
    assert swap_test(m, s).fidelity == pytest.approx(1.0)
    for k in range(6):
        assert abs(fidelity_gradient(m, s, k)) < 1e-6


def test_gradient_zero_for_trivial_rz():
    # with every RY at 0 the RZ gates only add phases to |00>
    m = ClassModel("3", params=np.array([0.0, 0.7, 0.0, 1.3, 0.0, 0.2]))
    s = EncodedInput("rotation", (1.0, 0.5, 2.0, 0.1))
    for k in (1, 3, 5):
        assert abs(fidelity_gradient(m, s, k)) < 1e-12


def test_batch_gradient_is_mean_of_singles(rng):
    m = ClassModel.random("3", rng)
    samples = [random_input(rng, "rotation") for _ in range(5)]
    g, f = batch_gradient(m, samples)
    singles = np.array([[fidelity_gradient(m, s, k) for k in range(6)] for s in samples])
    assert np.allclose(g, singles.mean(axis=0), atol=1e-12)
    assert np.allclose(f, [swap_test(m, s).fidelity for s in samples], atol=1e-12)


def test_zero_learning_rate_leaves_params(rng):
    m = ClassModel.random("3", rng)
    before = m.params.copy()
    samples = [random_input(rng, "rotation") for _ in range(6)]
    train_class(m, samples, TrainConfig(learning_rate=0.0, epochs_per_class=2, batch_size=2), rng)
    assert np.array_equal(m.params, before)


@pytest.mark.parametrize("method,seed", [("rotation", 6), ("amplitude", 4)])
def test_single_sample_converges(method, seed):
    # from a random start lr 0.01 needs a few hundred to a few thousand steps
    rng = np.random.default_rng(seed)
    m = ClassModel.random("3", rng)
    s = random_input(rng, method)
    _, recs = train_class(m, [s], TrainConfig(learning_rate=0.01, epochs_per_class=1000), rng)
    history = [r.train_fidelity for r in recs] + [swap_test(m, s).fidelity]
    reached = next(i for i, f in enumerate(history) if f >= 0.99)
    assert np.all(np.diff(history[:reached + 1]) > 0)


def test_training_is_deterministic():
    def run():
        rng = np.random.default_rng(3)
        m = ClassModel.random("3", rng)
        samples = [random_input(rng, "amplitude") for _ in range(8)]
        _, recs = train_class(m, samples, TrainConfig(epochs_per_class=2, batch_size=3), rng)
        return m.params, [r.train_fidelity for r in recs]

    a, b = run(), run()
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


def test_train_fidelity_improves(rng):
    samples = [EncodedInput("rotation", tuple(np.clip(rng.normal([0.5, 1.0, 2.5, 0.3], 0.1), 0, 3))) for _ in range(40)]
    m = ClassModel.random("3", np.random.default_rng(0))
    _, recs = train_class(m, samples, TrainConfig(epochs_per_class=5, learning_rate=0.05), rng)
    fids = [r.train_fidelity for r in recs]
    assert all(b >= a - 0.02 for a, b in zip(fids, fids[1:]))
    assert fids[-1] > fids[0]


def test_empty_samples_rejected(rng):
    with pytest.raises(ConfigError):
        train_class(ClassModel("3"), [], TrainConfig(), rng)


def test_evaluate_ranges_and_errors(rng):
    m3, m6 = ClassModel.random("3", rng), ClassModel.random("6", rng)
    samples = [random_input(rng, "rotation") for _ in range(20)]
    labels = ["3", "6"] * 10
    rec = evaluate(m3, m6, samples, labels)
    assert 0 <= rec.accuracy <= 1 and rec.loss >= 0 and 0 <= rec.entropy <= math.log(2) + 1e-9
    with pytest.raises(MetricsError):
        evaluate(m3, m6, [], [])


def test_perfect_separation_metrics():
    rec = metrics_from_fidelities([1.0, 0.0], [0.0, 1.0], ["3", "6"])
    assert rec.accuracy == 1.0 and rec.loss < 1e-6 and rec.entropy < 1e-6


def test_untrained_models_near_chance():
    from quencode.data import fit_pca, make_synthetic_dataset, prepare_inputs

    images, labels = make_synthetic_dataset(0, 200)
    pca = fit_pca(images[:100])
    inputs = prepare_inputs("rotation", images[100:], pca)
    accs = []
    for seed in range(8):
        r = np.random.default_rng(seed)
        rec = evaluate(ClassModel.random("3", r), ClassModel.random("6", r), inputs, [str(v) for v in labels[100:]])
        accs.append(rec.accuracy)
    assert abs(np.mean(accs) - 0.5) <= 0.15


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(epochs_per_class=0)
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=-1)
