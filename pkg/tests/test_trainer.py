import numpy as np
import pytest

from fern import operator_models as om
from fern import trainer
from fern.dense_nets import DenseNet, LayerSpec
from fern.errors import TrainingError
from fern.hat_basis import HatParams, hat_eval_relu
from fern.trainer import (
    AdamState,
    TrainConfig,
    adam_step,
    cosine_lr,
    mse_loss,
    train,
)


class FakeSample:
    def __init__(self, u, x, v):
        self.u_sensors = np.asarray(u, dtype=float)
        self.x_out = np.asarray(x, dtype=float)
        self.v_out = np.asarray(v, dtype=float)


class FakeDataset:
    def __init__(self, samples, sensor_grid):
        self.samples = samples
        self.sensor_grid = np.asarray(sensor_grid, dtype=float)


def teacher_student(seed=1, n_samples=10):
    """Linear-branch FERN pair: targets generated by the teacher."""
    rng = np.random.default_rng(seed)
    hat = HatParams(np.linspace(0.2, 0.8, 4), np.full(4, 0.3))
    teacher = om.FernModel(
        [DenseNet((LayerSpec(6, 1, False),), "tanh", rng.normal(size=6)) for _ in range(4)],
        hat,
    )
    samples = []
    for _ in range(n_samples):
        u = rng.normal(size=6)
        xs = np.sort(rng.uniform(0, 1, 15))
        samples.append(FakeSample(u, xs, om.predict(teacher, u, xs)))
    dataset = FakeDataset(samples, np.zeros(6))
    student = om.FernModel(
        [DenseNet((LayerSpec(6, 1, False),), "tanh", rng.normal(size=6) * 0.3) for _ in range(4)],
        hat.copy(),
    )
    return student, dataset


def test_cosine_schedule_endpoints_and_midpoint():
    assert cosine_lr(0, 100, 1e-2, 0.0) == pytest.approx(1e-2)
    assert cosine_lr(99, 100, 1e-2, 0.0) == pytest.approx(0.0, abs=1e-18)
    assert cosine_lr(50, 101, 1e-2, 2e-3) == pytest.approx((1e-2 + 2e-3) / 2)
    assert cosine_lr(0, 1, 5e-3, 0.0) == 5e-3
    with pytest.raises(ValueError):
        cosine_lr(100, 100, 1e-2, 0.0)
    with pytest.raises(ValueError):
        cosine_lr(-1, 100, 1e-2, 0.0)


def test_mse_examples_and_loop_oracle():
    assert mse_loss([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mse_loss(np.full(7, 3.0), np.full(7, 1.0)) == pytest.approx(4.0)
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=20), rng.normal(size=20)
    want = sum((x - y) ** 2 for x, y in zip(a, b)) / 20
    assert mse_loss(a, b) == pytest.approx(want, rel=1e-12)
    with pytest.raises(ValueError):
        mse_loss(np.zeros(3), np.zeros(4))


def test_adam_zero_gradients_leave_params_unchanged():
    params = np.array([1.0, -2.0])
    out, state = adam_step(params, np.zeros(2), AdamState.zeros(2), 0.1)
    assert np.array_equal(out, params)
    assert state.t == 1


def test_adam_first_step_magnitude_is_learning_rate():
    out, _ = adam_step(np.array([5.0]), np.array([1.0]), AdamState.zeros(1), 0.1)
    assert 5.0 - out[0] == pytest.approx(0.1, rel=1e-6)


def test_adam_converges_on_quadratic():
    theta = np.array([1.0])
    state = AdamState.zeros(1)
    for _ in range(200):
        theta, state = adam_step(theta, 2.0 * theta, state, 0.1)
    assert abs(theta[0]) < 1e-2


def test_adam_rejects_nonfinite_gradients():
    with pytest.raises(TrainingError):
        adam_step(np.zeros(2), np.array([1.0, np.nan]), AdamState.zeros(2), 0.1)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(lr0=1e-3, lr_min=1e-2)
    with pytest.raises(ValueError):
        TrainConfig(batch=0)


def test_training_fits_representable_target():
    # one sample whose target is exactly a scaled initial hat
    xs = np.linspace(0.46, 0.54, 21)
    target = 0.3 * hat_eval_relu(0.5, 0.05, xs)
    u = np.linspace(0, 1, 5)
    dataset = FakeDataset([FakeSample(u, xs, target)], u)
    model = om.make_fern(1, 5, (0, 1), seed=0, h0=0.05)
    model, hist = train(model, dataset, TrainConfig(epochs=2000, lr0=1e-2, seed=0))
    assert hist.loss[-1] < 1e-8


def test_training_is_deterministic():
    student, dataset = teacher_student()
    runs = []
    for _ in range(2):
        model = om.FernModel(
            [DenseNet(b.layers, b.activation, b.params.copy()) for b in student.branches],
            student.hat.copy(),
        )
        model, hist = train(model, dataset, TrainConfig(epochs=40, lr0=1e-2, seed=3))
        runs.append((om.get_flat_params(model), np.array(hist.loss)))
    assert np.array_equal(runs[0][0], runs[1][0])
    assert np.array_equal(runs[0][1], runs[1][1])


def test_fifty_steps_halve_the_loss_on_linear_problem():
    student, dataset = teacher_student()
    from fern.trainer import _loss_and_grads, _make_groups

    u, groups = _make_groups(dataset)
    loss0, _ = _loss_and_grads(student, u, groups)
    student, hist = train(student, dataset, TrainConfig(epochs=50, lr0=1e-2, seed=0))
    assert hist.loss[-1] <= 0.5 * loss0


def test_support_projection_holds_throughout(monkeypatch):
    rng = np.random.default_rng(5)
    xs = np.linspace(0, 1, 30)
    samples = [FakeSample(rng.normal(size=4), xs, rng.normal(size=30)) for _ in range(6)]
    dataset = FakeDataset(samples, np.zeros(4))
    h_min = 0.03
    model = om.make_fern(5, 4, (0, 1), seed=1, h0=0.032)
    sl = om.support_slice(model)
    seen = []
    original = trainer.adam_step

    def spy(params, grads, state, lr, adam=trainer.AdamConstants()):
        seen.append(np.min(params[sl]))  # params after the previous projection
        return original(params, grads, state, lr, adam)

    monkeypatch.setattr(trainer, "adam_step", spy)
    model, _ = train(model, dataset, TrainConfig(epochs=120, lr0=5e-2, seed=0, h_min=h_min))
    assert len(seen) == 120
    assert all(m >= h_min - 1e-15 for m in seen[1:])
    assert np.min(model.hat.supports) >= h_min


def test_history_lengths_and_lr_trace():
    student, dataset = teacher_student(n_samples=4)
    epochs = 30
    _, hist = train(student, dataset, TrainConfig(epochs=epochs, lr0=1e-2, seed=0))
    assert len(hist.loss) == len(hist.lr) == len(hist.wall_time) == epochs
    assert hist.lr[0] == pytest.approx(1e-2)
    assert hist.lr[-1] == pytest.approx(0.0, abs=1e-18)


def test_minibatch_path_is_deterministic_and_trains():
    student, dataset = teacher_student(n_samples=9)
    from fern.trainer import _loss_and_grads, _make_groups

    u, groups = _make_groups(dataset)
    loss0, _ = _loss_and_grads(student, u, groups)
    results = []
    for _ in range(2):
        model = om.FernModel(
            [DenseNet(b.layers, b.activation, b.params.copy()) for b in student.branches],
            student.hat.copy(),
        )
        model, hist = train(model, dataset, TrainConfig(epochs=40, lr0=1e-2, seed=7, batch=4))
        results.append((om.get_flat_params(model), hist.loss[-1]))
    assert np.array_equal(results[0][0], results[1][0])
    assert results[0][1] < loss0


def test_sensor_width_mismatch_rejected():
    student, dataset = teacher_student()
    wrong = om.make_fern(3, 5, (0, 1), seed=0)
    with pytest.raises(ValueError):
        train(wrong, dataset, TrainConfig(epochs=1))


def test_history_csv_roundtrip(tmp_path):
    student, dataset = teacher_student(n_samples=3)
    _, hist = train(student, dataset, TrainConfig(epochs=5, lr0=1e-2, seed=0))
    path = tmp_path / "history.csv"
    hist.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "epoch,loss,lr,wall_time"
    assert len(lines) == 6
    assert float(lines[1].split(",")[1]) == hist.loss[0]
