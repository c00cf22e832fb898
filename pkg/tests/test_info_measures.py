import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import norm

from genbound.core_model import FiniteDistribution
from genbound.errors import DomainError
from genbound.info_measures import (
    LN2,
    FiniteJoint,
    conditional_mutual_information,
    dv_gap,
    kl_divergence,
    log_cosh,
    mixed_gaussian_mi,
    mixed_gaussian_mi_alpha,
    mutual_information,
    sample_conditioned_mi,
)
from genbound.supersample import decouple


def loop_kl(p, q):
    total = 0.0
    for a, b in zip(p, q):
        if a > 0:
            total += a * math.log(a / b)
    return total


def loop_mi(t):
    px = t.sum(axis=1)
    py = t.sum(axis=0)
    total = 0.0
    for i in range(t.shape[0]):
        for j in range(t.shape[1]):
            if t[i, j] > 0:
                total += t[i, j] * math.log(t[i, j] / (px[i] * py[j]))
    return total


def mixture_mi_by_entropy(nu, sigma2):
    """h(V) - h(V|R), with h(V) integrated from the mixture density."""
    s = math.sqrt(sigma2)

    def neg_plogp(v):
        p = 0.5 * (norm.pdf(v, nu, s) + norm.pdf(v, -nu, s))
        return -p * math.log(p) if p > 0 else 0.0

    span = abs(nu) + 12 * s
    h, _ = integrate.quad(neg_plogp, -span, span, limit=400, epsabs=1e-13, epsrel=1e-12, points=[-nu, 0.0, nu])
    return h - 0.5 * math.log(2 * math.pi * math.e * sigma2)


def test_log_cosh_large_argument():
    assert log_cosh(1000.0) == pytest.approx(1000.0 - LN2)
    assert log_cosh(0.0) == 0.0
    x = np.linspace(-20, 20, 101)
    assert np.allclose(log_cosh(x), np.log(np.cosh(x)), rtol=1e-13, atol=1e-15)


def test_joint_validation():
    with pytest.raises(DomainError):
        FiniteJoint(np.full((2, 2), 0.3))
    with pytest.raises(DomainError):
        FiniteJoint(np.ones(4) / 4)


def test_kl_identity_and_atom():
    p = FiniteDistribution([0.2, 0.8])
    assert kl_divergence(p, p) == 0.0
    assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))


def test_kl_not_dominated_is_inf():
    assert kl_divergence([0.5, 0.5], [1.0, 0.0]) == math.inf


def test_kl_shape_mismatch():
    with pytest.raises(DomainError):
        kl_divergence([0.5, 0.5], [0.2, 0.3, 0.5])


def test_kl_random_matches_loop(rng):
    for _ in range(20):
        p, q = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
        assert kl_divergence(p, q) == pytest.approx(loop_kl(p, q), abs=1e-14)


def test_kl_nonnegative_and_zero_only_at_equality(rng):
    for _ in range(50):
        p, q = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
        assert kl_divergence(p, q) > 0
        assert kl_divergence(p, p) == 0.0


def test_mi_basic_cases():
    assert mutual_information(FiniteJoint(np.outer([0.3, 0.7], [0.4, 0.6]))) == pytest.approx(0.0, abs=1e-15)
    assert mutual_information(FiniteJoint(np.eye(2) / 2)) == pytest.approx(math.log(2))


def test_mi_random_matches_loop(rng):
    t = rng.dirichlet(np.ones(9)).reshape(3, 3)
    assert mutual_information(FiniteJoint(t)) == pytest.approx(loop_mi(t), abs=1e-14)


def test_mi_rejects_three_axes(rng):
    with pytest.raises(DomainError):
        mutual_information(FiniteJoint(rng.dirichlet(np.ones(8)).reshape(2, 2, 2)))


def test_cmi_conditionally_independent():
    pu = np.array([0.25, 0.75])
    t = np.stack([np.outer([0.1, 0.9], [0.5, 0.5]) * pu[0], np.outer([0.6, 0.4], [0.2, 0.8]) * pu[1]], axis=2)
    assert conditional_mutual_information(FiniteJoint(t)) == pytest.approx(0.0, abs=1e-15)


def test_cmi_constant_u_reduces_to_mi(rng):
    t = rng.dirichlet(np.ones(6)).reshape(2, 3)
    assert conditional_mutual_information(FiniteJoint(t[:, :, None])) == pytest.approx(
        mutual_information(FiniteJoint(t)), abs=1e-15
    )


def test_cmi_random_matches_per_u_loop(rng):
    t = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)
    oracle = sum(t[:, :, u].sum() * loop_mi(t[:, :, u] / t[:, :, u].sum()) for u in range(2))
    assert conditional_mutual_information(FiniteJoint(t)) == pytest.approx(oracle, abs=1e-14)


def test_sample_conditioned_deterministic():
    t = np.zeros((2, 2, 2))
    t[0, 0, 0] = t[1, 1, 1] = 0.5
    sc = sample_conditioned_mi(FiniteJoint(t))
    assert np.all(sc.values() == 0.0)


def test_sample_conditioned_full_bit():
    t = np.zeros((2, 2, 3))
    for u, w in enumerate([0.2, 0.3, 0.5]):
        t[:, :, u] = np.eye(2) / 2 * w
    sc = sample_conditioned_mi(FiniteJoint(t))
    assert np.allclose(sc.values(), math.log(2))


def test_sample_conditioned_skips_empty_slices():
    t = np.zeros((2, 2, 3))
    t[:, :, 0] = np.eye(2) / 4
    t[:, :, 2] = 0.125
    sc = sample_conditioned_mi(FiniteJoint(t))
    assert list(sc.support()) == [0, 2]


def test_sample_conditioned_mean_is_cmi(rng):
    for _ in range(20):
        t = rng.dirichlet(np.ones(27)).reshape(3, 3, 3)
        sc = sample_conditioned_mi(FiniteJoint(t))
        assert sc.mean == pytest.approx(conditional_mutual_information(FiniteJoint(t)), abs=1e-12)
        assert sc.mean == pytest.approx(float(np.dot(sc.weights(), sc.values())), abs=1e-12)
        assert np.all(sc.values() >= 0)


def test_mixed_gaussian_zero_separation():
    assert mixed_gaussian_mi(0.0, 1.0) == 0.0


def test_mixed_gaussian_small_separation():
    val = mixed_gaussian_mi(0.05, 1.0)
    assert val * 2 / 0.05 ** 2 == pytest.approx(1.0, rel=0.05)


def test_mixed_gaussian_large_separation():
    assert mixed_gaussian_mi(10.0, 1.0) == pytest.approx(math.log(2), abs=1e-6)


@pytest.mark.parametrize("nu,sigma2", [(0.3, 1.0), (1.0, 1.0), (0.7, 0.25), (2.5, 4.0)])
def test_mixed_gaussian_matches_entropy_difference(nu, sigma2):
    assert mixed_gaussian_mi(nu, sigma2) == pytest.approx(mixture_mi_by_entropy(nu, sigma2), abs=1e-9)


def test_mixed_gaussian_monotone_and_bounded():
    grid = np.linspace(0, 6, 121)
    vals = np.array([mixed_gaussian_mi(v, 1.0) for v in grid])
    assert np.all(np.diff(vals) >= -1e-12)
    assert np.all(vals <= math.log(2) + 1e-15)


def test_mixed_gaussian_vectorized_agrees():
    alpha = np.array([0.0, 0.01, 0.3, 1.0, 2.0, 5.0, 9.0])
    scalar = np.array([mixed_gaussian_mi(a, 1.0) for a in alpha])
    assert np.allclose(mixed_gaussian_mi_alpha(alpha), scalar, atol=1e-9)


def test_mixed_gaussian_bad_variance():
    with pytest.raises(DomainError):
        mixed_gaussian_mi(1.0, 0.0)


def test_dv_gap_zero_lambda(rng):
    t = rng.dirichlet(np.ones(4)).reshape(2, 2)
    assert dv_gap(t, t, rng.normal(size=(2, 2)), 0.0) == 0.0


def test_dv_gap_same_law_nonpositive(rng):
    t = rng.dirichlet(np.ones(6)).reshape(2, 3)
    f = rng.normal(size=(2, 3))
    for lam in (-3.0, -0.5, 0.5, 2.0, 10.0):
        assert dv_gap(t, t, f, lam) <= 1e-15


def test_dv_gap_below_kl(rng):
    for _ in range(100):
        shape = tuple(int(k) for k in rng.integers(2, 4, size=3))
        joint = FiniteJoint(rng.dirichlet(np.ones(np.prod(shape))).reshape(shape))
        dec = decouple(joint).decoupled
        f = rng.uniform(-1, 1, size=shape)
        lam = float(rng.uniform(-5, 5))
        kl = loop_kl(joint.table.ravel(), dec.table.ravel())
        assert dv_gap(joint, dec, f, lam) <= kl + 1e-12
