import numpy as np
import pytest

from pulse import tensor as T
from pulse.errors import DomainError
from pulse.optim import (ParamGroup, adam_step, clip_global_norm, grad_check,
                         group_errors_by_prefix, uniform_init)


def make_group(values):
    group = ParamGroup()
    for name, v in values.items():
        group.add(name, v)
    return group


# ---------------------------------------------------------------------------
# grad_check on each differentiable op at random points

def op_cases():
    rng = np.random.default_rng(11)

    def c(name, build, shape):
        return name, build, rng.standard_normal(shape)

    gain = rng.standard_normal(5) * 0.3 + 1.0
    bias = rng.standard_normal(5) * 0.3
    other = rng.standard_normal((4, 5)) + 2.5
    w = rng.standard_normal((5, 3))
    mask = rng.random((4, 5)) > 0.4
    mask[:, 0] = True
    return [
        c("add", lambda x: T.tsum(T.add(x, T.Tensor(other))), (4, 5)),
        c("sub", lambda x: T.tsum(T.sub(T.Tensor(other), x)), (4, 5)),
        c("mul", lambda x: T.tsum(T.mul(x, T.Tensor(other))), (4, 5)),
        c("div", lambda x: T.tsum(T.div(x, T.Tensor(other))), (4, 5)),
        c("scale", lambda x: T.tsum(T.scale(x, -1.7)), (4, 5)),
        c("matmul", lambda x: T.tsum(T.matmul(x, T.Tensor(w))), (4, 5)),
        c("transpose", lambda x: T.tsum(T.mul(T.transpose(x), T.Tensor(other.T))), (4, 5)),
        c("reshape", lambda x: T.tsum(T.mul(T.reshape(x, (2, 10)),
                                            T.Tensor(other.reshape(2, 10)))), (4, 5)),
        c("concat", lambda x: T.tsum(T.mul(T.concat_lastdim([x, x]),
                                           T.Tensor(np.tile(other, (1, 2))))), (4, 5)),
        c("slice", lambda x: T.tsum(T.mul(T.slice_lastdim(x, 1, 4),
                                          T.Tensor(other[:, 1:4]))), (4, 5)),
        c("mean", lambda x: T.tsum(T.mul(T.mean_over_axis(x, 0), T.Tensor(other[0]))), (4, 5)),
        c("relu", lambda x: T.tsum(T.mul(T.relu(x), T.Tensor(other))), (4, 5)),
        c("sigmoid", lambda x: T.tsum(T.mul(T.sigmoid(x), T.Tensor(other))), (4, 5)),
        c("sqrt", lambda x: T.tsum(T.sqrt(T.mul(x, x))), (4, 5)),
        c("softmax", lambda x: T.tsum(T.mul(T.softmax_lastdim(x, mask=mask),
                                            T.Tensor(other))), (4, 5)),
        c("softmax_bias", lambda x: T.tsum(T.mul(
            T.softmax_lastdim(T.Tensor(other), bias=x), T.Tensor(other))), (4, 5)),
        c("layer_norm", lambda x: T.tsum(T.mul(
            T.layer_norm(x, T.Tensor(gain), T.Tensor(bias)), T.Tensor(other))), (4, 5)),
        c("dropout", lambda x: T.tsum(T.mul(T.dropout(x, 0.4, key=9, train=True),
                                            T.Tensor(other))), (4, 5)),
    ]


@pytest.mark.parametrize("name,build,point", op_cases(), ids=lambda v: v if isinstance(v, str) else "")
def test_grad_check_per_op(name, build, point):
    worst = 0.0
    for trial in range(10):
        rng = np.random.default_rng(1000 + 17 * trial)
        group = make_group({"x": point + 0.05 * rng.standard_normal(point.shape)})
        report = grad_check(lambda g: build(g["x"]), group)
        worst = max(worst, report["x"])
    assert worst < 1e-4, f"{name}: max rel err {worst}"


def test_grad_check_linear_is_exact():
    group = make_group({"x": np.array([0.3, -1.2, 4.0])})
    report = grad_check(lambda g: T.tsum(g["x"]), group)
    assert report["x"] < 1e-10


def test_grad_check_sigmoid_at_zero():
    group = make_group({"x": np.zeros(3)})
    group.zero_grad()
    loss = T.tsum(T.sigmoid(group["x"]))
    T.backward(loss)
    np.testing.assert_allclose(group["x"].grad, 0.25, atol=1e-12)
    report = grad_check(lambda g: T.tsum(T.sigmoid(g["x"])), group)
    assert report["x"] < 1e-4


def test_grad_check_rejects_bad_step():
    group = make_group({"x": np.zeros(2)})
    with pytest.raises(DomainError):
        grad_check(lambda g: T.tsum(g["x"]), group, step=0.0)


def test_two_layer_mlp_grad_check():
    rng = np.random.default_rng(21)
    group = make_group({
        "w1": uniform_init(rng, (6, 8), 6),
        "b1": np.zeros(8),
        "w2": uniform_init(rng, (8, 2), 8),
        "b2": np.zeros(2),
    })
    x = T.Tensor(rng.standard_normal((5, 6)))
    target = T.Tensor(rng.standard_normal((5, 2)))

    def build(g):
        h = T.relu(T.affine(x, g["w1"], g["b1"]))
        out = T.affine(h, g["w2"], g["b2"])
        diff = T.sub(out, target)
        return T.mean_over_axis(T.reshape(T.mul(diff, diff), (10,)), axis=0)

    report = grad_check(build, group)
    assert max(report.values()) < 1e-4


# ---------------------------------------------------------------------------
# adam / clipping

def test_adam_zero_grads_no_decay_leaves_params():
    group = make_group({"w": np.array([1.0, -2.0])})
    adam_step(group, {"w": np.zeros(2)}, lr=0.1, weight_decay=0.0)
    np.testing.assert_array_equal(group["w"].data, [1.0, -2.0])


def test_clip_below_threshold_unchanged():
    grads = {"a": np.array([0.3, 0.4])}  # norm 0.5
    clipped, norm = clip_global_norm(grads, 1.0)
    assert norm == pytest.approx(0.5)
    np.testing.assert_array_equal(clipped["a"], grads["a"])


def test_clip_rescales_to_max_norm():
    grads = {"a": np.array([3.0, 0.0]), "b": np.array([4.0])}  # norm 5
    clipped, norm = clip_global_norm(grads, 1.0)
    assert norm == pytest.approx(5.0)
    total = np.sqrt(sum(float((g * g).sum()) for g in clipped.values()))
    assert total == pytest.approx(1.0)
    np.testing.assert_allclose(clipped["a"], [0.6, 0.0])


def test_adam_single_scalar_matches_hand_recurrence():
    lr, b1, b2, eps, wd = 0.01, 0.9, 0.999, 1e-8, 0.1
    theta0, g = 2.0, 0.5
    group = make_group({"w": np.array([theta0])})
    adam_step(group, {"w": np.array([g])}, lr=lr, beta1=b1, beta2=b2,
              eps_adam=eps, weight_decay=wd)
    # hand recurrence: decoupled decay first, then bias-corrected Adam
    theta = theta0 - lr * wd * theta0
    m = (1 - b1) * g
    v = (1 - b2) * g * g
    theta -= lr * (m / (1 - b1)) / (np.sqrt(v / (1 - b2)) + eps)
    assert abs(group["w"].data[0] - theta) < 1e-12


def test_adam_two_steps_match_hand_recurrence():
    lr, b1, b2, eps = 0.05, 0.8, 0.99, 1e-8
    group = make_group({"w": np.array([1.0])})
    grads = [0.3, -0.7]
    m = v = 0.0
    theta = 1.0
    for t, g in enumerate(grads, start=1):
        adam_step(group, {"w": np.array([g])}, lr=lr, beta1=b1, beta2=b2,
                  eps_adam=eps, weight_decay=0.0)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    assert abs(group["w"].data[0] - theta) < 1e-12


def test_adam_rejects_bad_betas():
    group = make_group({"w": np.array([1.0])})
    with pytest.raises(DomainError):
        adam_step(group, {"w": np.array([0.0])}, lr=0.1, beta1=1.0)


def test_group_errors_by_prefix():
    table = {"head.l1.weight": 1e-6, "head.l2.weight": 3e-6, "gate.weight": 2e-7}
    grouped = group_errors_by_prefix(table)
    assert grouped == {"head": 3e-6, "gate": 2e-7}


def test_moment_buffers_match_shapes_and_start_zero():
    group = make_group({"w": np.ones((3, 2)), "b": np.ones(2)})
    for name in group.names():
        assert group.m[name].shape == group[name].data.shape
        assert np.all(group.m[name] == 0.0) and np.all(group.v[name] == 0.0)
