import numpy as np
import pytest

from frechetnet.errors import NumericError, SampleSizeError
from frechetnet.gradients import batch_risk, check_gradients, head_risk_and_grad, loss_and_grad
from frechetnet.network import Architecture, init_params
from frechetnet.numerics import finite_diff_gradient, seeded_rng
from frechetnet.spaces import Aitchison, Euclidean, Laplacian, Wasserstein, random_points

SPACES = [Euclidean(2), Wasserstein(5), Laplacian(4), Aitchison(4)]


@pytest.mark.parametrize("space", SPACES, ids=repr)
def test_check_gradients(space):
    report = check_gradients(space, trials=5, rng=seeded_rng(1))
    assert report["max_rel_error"] < 1e-4, report


def test_all_active_single_layer_has_zero_gradient():
    # an all-active layer is an affine map of X and the head is affine invariant
    rng = seeded_rng(2)
    arch = Architecture(2, (2,))
    params = init_params(arch, rng)
    params.biases[0] += 2.0
    X = rng.normal(size=(10, 2)) * 0.3
    Y = rng.normal(size=(10, 1))
    _, g = loss_and_grad(X, Y, params, arch, Euclidean(1), train=False, ridge_policy=0.0)
    assert np.max(np.abs(g.flatten())) < 1e-12


def test_euclidean_fd_with_mixed_activations():
    rng = seeded_rng(12)
    arch = Architecture(3, (5, 2))
    params = init_params(arch, rng)
    X = rng.normal(size=(15, 3))
    Y = rng.normal(size=(15, 1))
    sp = Euclidean(1)
    _, g = loss_and_grad(X, Y, params, arch, sp, train=False, ridge_policy=0.0)
    fd = finite_diff_gradient(lambda t: batch_risk(X, Y, params.unflatten(t), arch, sp, 0.0), params.flatten(), 1e-5)
    assert np.linalg.norm(fd) > 1e-3
    assert np.linalg.norm(g.flatten() - fd) / np.linalg.norm(fd) < 1e-4


def test_wasserstein_batch_of_four():
    rng = seeded_rng(3)
    sp = Wasserstein(5)
    arch = Architecture(2, (1,))
    params = init_params(arch, rng)
    params.biases[0] += 2.0
    X = rng.normal(size=(4, 2))
    Y = random_points(sp, 4, rng)
    _, g = loss_and_grad(X, Y, params, arch, sp, train=False, ridge_policy=0.0, projection="exact")
    fd = finite_diff_gradient(lambda t: batch_risk(X, Y, params.unflatten(t), arch, sp, 0.0), params.flatten(), 1e-5)
    assert np.linalg.norm(g.flatten() - fd) / np.linalg.norm(fd) < 1e-3


@pytest.mark.parametrize("space", SPACES, ids=repr)
def test_constant_responses_zero(space):
    rng = seeded_rng(4)
    arch = Architecture(3, (5, 2))
    params = init_params(arch, rng)
    Y = np.repeat(random_points(space, 1, rng), 12, axis=0)
    report, g = loss_and_grad(rng.normal(size=(12, 3)), Y, params, arch, space, train=False)
    assert report.risk == pytest.approx(0.0, abs=1e-20)
    assert np.max(np.abs(g.flatten())) < 1e-12


@pytest.mark.parametrize("space", SPACES, ids=repr)
def test_permutation_invariance(space):
    rng = seeded_rng(5)
    arch = Architecture(3, (6, 3))
    params = init_params(arch, rng)
    X = rng.normal(size=(14, 3))
    Y = random_points(space, 14, rng)
    perm = rng.permutation(14)
    r1, g1 = loss_and_grad(X, Y, params, arch, space, train=False)
    r2, g2 = loss_and_grad(X[perm], Y[perm], params, arch, space, train=False)
    assert r1.risk == pytest.approx(r2.risk, rel=1e-12)
    np.testing.assert_allclose(g1.flatten(), g2.flatten(), rtol=1e-9, atol=1e-13)


def test_straight_through_equals_exact_for_euclidean():
    rng = seeded_rng(6)
    arch = Architecture(3, (6, 3))
    params = init_params(arch, rng)
    X, Y = rng.normal(size=(12, 3)), rng.normal(size=(12, 2))
    _, a = loss_and_grad(X, Y, params, arch, Euclidean(2), train=False, projection="straight_through")
    _, b = loss_and_grad(X, Y, params, arch, Euclidean(2), train=False, projection="exact")
    np.testing.assert_array_equal(a.flatten(), b.flatten())


def test_detached_stats_differ():
    rng = seeded_rng(7)
    F, E = rng.normal(size=(10, 3)), rng.normal(size=(10, 2))
    # with ridge 0 the two agree by the envelope theorem, so use a ridge
    _, full, _, _ = head_risk_and_grad(F, E, Euclidean(2), ridge_policy=0.5)
    _, det, _, _ = head_risk_and_grad(F, E, Euclidean(2), ridge_policy=0.5, detach_stats=True)
    assert not np.allclose(full, det)


def test_batch_too_small():
    arch = Architecture(2, (2,))
    with pytest.raises(SampleSizeError):
        loss_and_grad(np.zeros((1, 2)), np.zeros((1, 1)), init_params(arch, seeded_rng(0)), arch, Euclidean(1))


def test_nonfinite_reports_index():
    F = np.array([[0.0], [1.0], [2.0]])
    E = np.array([[0.0], [np.inf], [1.0]])
    with pytest.raises(NumericError) as info:
        head_risk_and_grad(F, E, Euclidean(1))
    assert info.value.index == 1
