import numpy as np
import pytest

from frechetnet.errors import DimensionError, ParameterError
from frechetnet.network import Architecture, NetworkParams, backward, forward, init_params
from frechetnet.numerics import finite_diff_gradient, seeded_rng


def test_init_ranges():
    p = init_params(Architecture(2, (3,)), seeded_rng(0))
    assert np.all(np.abs(p.weights[0]) <= 1 / np.sqrt(2))
    p = init_params(Architecture(3, (4, 4)), seeded_rng(0))
    assert np.all(np.abs(p.biases[1]) <= 0.5)


def test_init_deterministic():
    arch = Architecture(5, (6, 3))
    a, b = init_params(arch, seeded_rng(4)), init_params(arch, seeded_rng(4))
    np.testing.assert_array_equal(a.flatten(), b.flatten())


def test_architecture_validation():
    with pytest.raises(ParameterError):
        Architecture(0, (3,))
    with pytest.raises(ParameterError):
        Architecture(2, ())
    with pytest.raises(ParameterError):
        Architecture(2, (3,), dropout=1.0)
    arch = Architecture.uniform(4, 16, 3, 5)
    assert arch.hidden_widths == (16, 16, 5)
    assert arch.output_dim == 5 and arch.depth == 3


def test_relu_clamp():
    arch = Architecture(2, (2,))
    params = NetworkParams([np.eye(2)], [np.zeros(2)])
    h, _ = forward(params, arch, np.array([[1.0, -1.0]]))
    np.testing.assert_array_equal(h, [[1.0, 0.0]])


def test_zero_params():
    arch = Architecture(3, (4, 2))
    params = init_params(arch, seeded_rng(0)).zeros_like()
    h, _ = forward(params, arch, seeded_rng(1).normal(size=(7, 3)))
    np.testing.assert_array_equal(h, 0.0)


def test_dimension_mismatch():
    arch = Architecture(3, (2,))
    with pytest.raises(DimensionError):
        forward(init_params(arch, seeded_rng(0)), arch, np.zeros((2, 4)))


def test_train_without_dropout_equals_eval():
    arch = Architecture(3, (5, 4))
    params = init_params(arch, seeded_rng(0))
    x = seeded_rng(1).normal(size=(6, 3))
    a, _ = forward(params, arch, x, train=True, rng=seeded_rng(2))
    b, _ = forward(params, arch, x, train=False)
    np.testing.assert_array_equal(a, b)


def test_batch_consistency():
    arch = Architecture(3, (5, 4))
    params = init_params(arch, seeded_rng(0))
    x = seeded_rng(1).normal(size=(6, 3))
    full, _ = forward(params, arch, x)
    rows = np.vstack([forward(params, arch, x[i:i + 1])[0] for i in range(6)])
    np.testing.assert_allclose(full, rows, rtol=1e-14, atol=1e-15)


def test_positive_homogeneity():
    arch = Architecture(3, (5,))
    params = init_params(arch, seeded_rng(0))
    x = seeded_rng(1).normal(size=(6, 3))
    scaled = NetworkParams([2.5 * params.weights[0]], [2.5 * params.biases[0]])
    np.testing.assert_allclose(forward(scaled, arch, x)[0], 2.5 * forward(params, arch, x)[0])


def test_dropout_mean_and_placement():
    arch = Architecture(2, (3, 2), dropout=0.3)
    params = init_params(arch, seeded_rng(0))
    x = np.array([[0.7, -0.2]])
    _, ref = forward(params, arch, x)
    rng = seeded_rng(5)
    draws = np.array([forward(params, arch, np.repeat(x, 1, 0), train=True, rng=rng)[1].post[0][0]
                      for _ in range(20000)])
    se = draws.std(axis=0) / np.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - ref.post[0][0]) <= 3 * se + 1e-12)
    _, cache = forward(params, arch, x, train=True, rng=rng)
    assert cache.masks[0] is not None and cache.masks[-1] is None


def test_dropout_requires_rng():
    arch = Architecture(2, (3, 2), dropout=0.3)
    with pytest.raises(ParameterError):
        forward(init_params(arch, seeded_rng(0)), arch, np.zeros((1, 2)), train=True)


def test_backward_matches_finite_differences():
    arch = Architecture(3, (6, 4, 2))
    params = init_params(arch, seeded_rng(3))
    x = seeded_rng(4).normal(size=(5, 3))
    G = seeded_rng(5).normal(size=(5, 2))

    def f(theta):
        return float(np.sum(G * forward(params.unflatten(theta), arch, x)[0]))

    _, cache = forward(params, arch, x)
    gw, gb = backward(params, cache, G)
    analytic = NetworkParams(gw, gb).flatten()
    np.testing.assert_allclose(analytic, finite_diff_gradient(f, params.flatten(), 1e-6), atol=1e-7)


def test_flatten_roundtrip():
    params = init_params(Architecture(3, (4, 2)), seeded_rng(0))
    back = params.unflatten(params.flatten())
    np.testing.assert_array_equal(back.flatten(), params.flatten())
    with pytest.raises(DimensionError):
        params.unflatten(np.zeros(3))
