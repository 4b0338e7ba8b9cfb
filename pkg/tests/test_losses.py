"""Loss zoo values, the lp penalty, the penalty schedule, the sharpened
objective, and the fitting/complementary gradient decomposition."""

import math

import numpy as np
import pytest

from srlab.autodiff import finite_diff_gradient, softmax_tau
from srlab.losses import (
    LOSS_KINDS,
    LossSpec,
    SRConfig,
    grad_decompose_ce,
    lambda_at,
    loss_values_all_classes,
    lp_penalty,
    pointwise_loss,
    sr_objective,
    sr_objective_with_logit_grad,
)

RNG = np.random.default_rng(99)


def _random_simplex(rng, k):
    return rng.dirichlet(np.ones(k))


def _simplex_lattice(step=0.01):
    """All k=3 lattice points (i, j, n-i-j)/n with spacing `step`."""
    n = round(1.0 / step)
    points = []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            points.append((i / n, j / n, (n - i - j) / n))
    return np.array(points)


class TestPointwiseValues:
    def test_ce_at_one_hot_is_zero(self):
        assert pointwise_loss(LossSpec("ce"), [0.0, 1.0, 0.0], 1) == 0.0

    def test_gce_reduces_to_one_minus_u_at_q_one(self):
        spec = LossSpec("gce", q=1.0)
        np.testing.assert_allclose(pointwise_loss(spec, [0.3, 0.7], 0), 0.7,
                                   rtol=1e-15)

    def test_sce_mnist_configuration_hand_value(self):
        # alpha=0.01, beta=1, A=-3 at u=(0.7, 0.2, 0.1), true class first
        spec = LossSpec.sce_mnist()
        expected = 0.01 * (-math.log(0.7)) + 1.0 * 3.0 * 0.3
        np.testing.assert_allclose(pointwise_loss(spec, [0.7, 0.2, 0.1], 0),
                                   expected, rtol=1e-14)

    def test_mae_identity_exact(self):
        for _ in range(50):
            u = _random_simplex(RNG, 5)
            y = int(RNG.integers(5))
            assert pointwise_loss(LossSpec("mae"), u, y) == 2.0 * (1.0 - u[y])

    def test_rce_is_scaled_mae(self):
        u = [0.6, 0.3, 0.1]
        np.testing.assert_allclose(pointwise_loss(LossSpec("rce", A=-3.0), u, 0),
                                   3.0 * 0.4, rtol=1e-15)

    def test_fl_modulates_ce(self):
        u = [0.25, 0.75]
        expected = (1 - 0.25) ** 0.3 * -math.log(0.25)
        np.testing.assert_allclose(pointwise_loss(LossSpec("fl"), u, 0),
                                   expected, rtol=1e-14)

    def test_nce_normalization_sums_to_one(self):
        for _ in range(100):
            u = _random_simplex(RNG, 4)
            total = sum(pointwise_loss(LossSpec("nce"), u, j) for j in range(4))
            np.testing.assert_allclose(total, 1.0, atol=1e-12)

    def test_apl_combines_nce_and_mae(self):
        spec = LossSpec("apl", alpha=2.0, beta=0.5)
        u = _random_simplex(RNG, 4)
        expected = (2.0 * pointwise_loss(LossSpec("nce"), u, 1)
                    + 0.5 * pointwise_loss(LossSpec("mae"), u, 1))
        np.testing.assert_allclose(pointwise_loss(spec, u, 1), expected,
                                   rtol=1e-14)

    def test_label_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="out of range"):
            pointwise_loss(LossSpec("ce"), [0.5, 0.5], 2)

    def test_off_simplex_rejected(self):
        with pytest.raises(ValueError, match="simplex"):
            pointwise_loss(LossSpec("ce"), [0.9, 0.3], 0)
        with pytest.raises(ValueError, match="simplex"):
            pointwise_loss(LossSpec("ce"), [1.2, -0.2], 0)


class TestLossSpecValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown loss kind"):
            LossSpec("huber")

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            LossSpec("gce", q=0.0)
        with pytest.raises(ValueError):
            LossSpec("rce", A=1.0)
        with pytest.raises(ValueError):
            LossSpec("sce", alpha=-0.1)
        with pytest.raises(ValueError):
            LossSpec("fl", gamma_f=-1.0)


def test_every_loss_nonnegative_with_minimum_at_one_hot_on_lattice():
    lattice = _simplex_lattice(0.01)
    y = 0
    one_hot_index = np.flatnonzero(lattice[:, y] == 1.0)[0]
    for kind in LOSS_KINDS:
        spec = LossSpec(kind)
        values = np.array([loss_values_all_classes(spec, u)[y] for u in lattice])
        assert values.min() >= -1e-15, kind
        assert values.argmin() == one_hot_index, kind


class TestLpPenalty:
    def test_one_hot_gives_one_for_any_p(self):
        for p in (0.01, 0.1, 0.5, 1.0):
            assert lp_penalty([0.0, 1.0, 0.0, 0.0], p) == 1.0

    def test_uniform_closed_form(self):
        np.testing.assert_allclose(lp_penalty([0.25] * 4, 0.5), 2.0, rtol=1e-15)
        k, p = 6, 0.3
        np.testing.assert_allclose(lp_penalty([1.0 / k] * k, p), k ** (1 - p),
                                   rtol=1e-14)

    def test_l1_on_simplex_is_constant(self):
        assert lp_penalty([0.5, 0.5, 0.0, 0.0], 1.0) == 1.0

    def test_p_out_of_range_rejected(self):
        for p in (0.0, -0.5, 1.5):
            with pytest.raises(ValueError, match="p must be"):
                lp_penalty([0.5, 0.5], p)

    def test_lattice_extremes_for_p_below_one(self):
        lattice = _simplex_lattice(0.01)
        values = np.array([np.power(u[u > 0], 0.5).sum() for u in lattice])
        vertices = np.flatnonzero((lattice == 1.0).any(axis=1))
        uniform = np.argmin(np.abs(lattice - 1 / 3).sum(axis=1))
        assert set(np.flatnonzero(values <= values.min() + 1e-12)) == set(vertices)
        assert values.argmax() == uniform


class TestLambdaSchedule:
    def test_mnist_preset_points(self):
        cfg = SRConfig.mnist()
        assert lambda_at(0, cfg) == 4.0
        assert lambda_at(5, cfg) == 8.0
        assert lambda_at(12, cfg) == 16.0

    def test_rho_one_is_constant(self):
        cfg = SRConfig(tau=0.5, p=0.5, lambda0=3.0, rho=1.0, r=2)
        assert all(lambda_at(t, cfg) == 3.0 for t in range(20))

    def test_cifar10_preset_epoch_119(self):
        cfg = SRConfig.cifar10()
        np.testing.assert_allclose(lambda_at(119, cfg), 1.1 * 1.03 ** 119,
                                   rtol=1e-15)

    def test_negative_epoch_rejected(self):
        with pytest.raises(ValueError, match="epoch"):
            lambda_at(-1, SRConfig.mnist())


class TestSRConfigValidation:
    def test_presets_match_published_settings(self):
        assert (SRConfig.mnist().tau, SRConfig.mnist().p,
                SRConfig.mnist().lambda0, SRConfig.mnist().rho,
                SRConfig.mnist().r) == (0.1, 0.1, 4.0, 2.0, 5)
        assert (SRConfig.cifar10().tau, SRConfig.cifar10().lambda0,
                SRConfig.cifar10().rho, SRConfig.cifar10().r) == (0.5, 1.1, 1.03, 1)
        assert (SRConfig.cifar100().p, SRConfig.cifar100().rho) == (0.01, 1.02)

    def test_invalid_fields(self):
        for kwargs in (dict(tau=0.0), dict(tau=1.5), dict(p=0.0),
                       dict(lambda0=-1.0), dict(rho=0.9), dict(r=0)):
            with pytest.raises(ValueError):
                SRConfig(**kwargs)


class TestSRObjective:
    def test_lambda_zero_reduces_to_plain_sharpened_loss(self):
        sr = SRConfig(tau=0.5, p=0.5, lambda0=0.0, rho=1.0, r=1,
                      l2_normalize_logits=False)
        logits = RNG.standard_normal((6, 4))
        labels = RNG.integers(0, 4, 6)
        value = sr_objective(LossSpec("ce"), sr, logits, labels, epoch=3)
        expected = np.mean([
            pointwise_loss(LossSpec("ce"), softmax_tau(z, 0.5), int(y))
            for z, y in zip(logits, labels)
        ])
        np.testing.assert_allclose(value, expected, rtol=1e-12)

    def test_single_sample_hand_value(self):
        # CE at uniform sharpened output plus lambda * l1 penalty
        sr = SRConfig(tau=1.0, p=1.0, lambda0=2.0, rho=1.0, r=1,
                      l2_normalize_logits=False)
        value = sr_objective(LossSpec("ce"), sr, [[0.0, 0.0]], [0], epoch=0)
        np.testing.assert_allclose(value, math.log(2.0) + 2.0, rtol=1e-14)

    def test_sce_equivalence_identity(self):
        # L(u,i) = -alpha log u_i - lam u_i with p=1 is the symmetric
        # cross entropy: the l1 penalty absorbs the -lam u_y shift because
        # the outputs sum to one
        alpha, lam = 0.4, 1.7
        shifted = LossSpec("sce", alpha=alpha, beta=0.0)
        sce = LossSpec("sce", alpha=alpha, beta=lam, A=-1.0)
        sr = SRConfig(tau=0.5, p=1.0, lambda0=lam, rho=1.0, r=1,
                      l2_normalize_logits=False)
        worst = 0.0
        for _ in range(1000):
            logits = RNG.standard_normal((1, 5)) * 3
            y = [int(RNG.integers(5))]
            u = softmax_tau(logits[0], 0.5)
            lhs = sr_objective(shifted, sr, logits, y, epoch=0) - lam * u[y[0]]
            rhs = pointwise_loss(sce, u, y[0])
            worst = max(worst, abs(lhs - rhs))
        assert worst <= 1e-12

    def test_gradient_matches_finite_differences_for_every_kind(self):
        for kind in LOSS_KINDS:
            spec = LossSpec(kind)
            for sr in (None, SRConfig.cifar10()):
                logits = RNG.standard_normal((3, 5))
                labels = RNG.integers(0, 5, 3)
                _, grad = sr_objective_with_logit_grad(spec, sr, logits, labels, 2)
                fd = finite_diff_gradient(
                    lambda flat: sr_objective(spec, sr, flat.reshape(3, 5),
                                              labels, 2),
                    logits.ravel(), 1e-5)
                rel = np.linalg.norm(grad.ravel() - fd) / np.linalg.norm(fd)
                assert rel < 1e-5, (kind, sr is not None)

    def test_l2_normalization_flag_changes_the_objective(self):
        logits = RNG.standard_normal((4, 3)) * 5
        labels = [0, 1, 2, 0]
        on = sr_objective(LossSpec("ce"), SRConfig.mnist(), logits, labels)
        off = sr_objective(LossSpec("ce"),
                           SRConfig.mnist(l2_normalize_logits=False),
                           logits, labels)
        assert abs(on - off) > 1e-6


class TestGradDecomposition:
    def test_zero_lambda_kills_complementary_term(self):
        z = RNG.standard_normal(5)
        _, comp = grad_decompose_ce(z, 2, tau=0.7, lam=0.0, p=0.1)
        np.testing.assert_array_equal(comp, np.zeros(5))

    def test_sum_matches_autodiff_gradient(self):
        for tau, lam, p in ((1.0, 0.5, 0.1), (0.7, 2.0, 0.5), (0.5, 1.1, 0.9)):
            z = np.random.default_rng(3).standard_normal(4)
            y = 1
            fitting, comp = grad_decompose_ce(z, y, tau, lam, p)
            sr = SRConfig(tau=tau, p=p, lambda0=lam, rho=1.0, r=1,
                          l2_normalize_logits=False)
            _, grad = sr_objective_with_logit_grad(LossSpec("ce"), sr,
                                                   z[None, :], [y], epoch=0)
            np.testing.assert_allclose(fitting + comp, grad[0], atol=1e-10)

    def test_fitting_coefficient_positive_in_low_lambda_regime(self):
        # lam * p < 1 and sigma_y < 1 imply 1/sigma_y > lam p sigma_y^(p-1)
        for _ in range(100):
            z = RNG.standard_normal(4)
            tau = float(RNG.uniform(0.2, 1.0))
            lam = float(RNG.uniform(0.0, 9.0))
            p = float(RNG.uniform(0.05, 1.0))
            if lam * p >= 1.0:
                continue
            s = softmax_tau(z, tau)
            y = int(RNG.integers(4))
            coefficient = 1.0 / s[y] - lam * p * s[y] ** (p - 1.0)
            assert coefficient > 0.0
