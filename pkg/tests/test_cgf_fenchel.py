import math

import numpy as np
import pytest

from genbound.cgf_fenchel import (
    CgfCurve,
    average_curve,
    cgf_empirical,
    cgf_exact,
    conditional_curve,
    empirical_curve,
    finite_curve,
    finite_family,
    inverse_fenchel,
    inverse_fenchel_batch,
    lncosh_curve,
    lncosh_lower,
    sample_conditioned_cgf,
    subgaussian_curve,
    subgaussian_inverse_conjugate,
)
from genbound.errors import DomainError, NumericError
from genbound.info_measures import FiniteJoint, kl_divergence
from genbound.supersample import decouple


def direct_cgf(values, probs, lam):
    mean = sum(p * v for p, v in zip(probs, values))
    return math.log(sum(p * math.exp(lam * (v - mean)) for p, v in zip(probs, values)))


def grid_inverse(psi, eta, points=1_000_000):
    lam = np.logspace(-6, 6, points)
    return float(np.min((eta + psi(lam)) / lam))


def test_cgf_exact_zero_and_rademacher():
    assert cgf_exact([1.0, -2.0, 4.0], [0.2, 0.5, 0.3], 0.0) == pytest.approx(0.0, abs=1e-15)
    for c in (0.5, 2.0):
        for lam in (0.3, 1.7):
            assert cgf_exact([-c, c], [0.5, 0.5], lam) == pytest.approx(math.log(math.cosh(c * lam)))


def test_cgf_exact_random_matches_sum(rng):
    v, p = rng.normal(size=5), rng.dirichlet(np.ones(5))
    assert cgf_exact(v, p, 0.7) == pytest.approx(direct_cgf(v, p, 0.7), abs=1e-14)


def test_cgf_exact_no_overflow():
    assert math.isfinite(cgf_exact([0.0, 1000.0], [0.5, 0.5], 5.0))


def test_cgf_empirical_cases(rng):
    assert cgf_empirical(np.full(10, 3.0), 2.0) == pytest.approx(0.0, abs=1e-14)
    assert cgf_empirical([-1.0, 1.0], 1.0) == pytest.approx(0.433781, abs=1e-6)
    x = np.random.default_rng(1).standard_normal(1_000_000)
    assert cgf_empirical(x, 0.5) == pytest.approx(0.125, abs=1e-2)
    with pytest.raises(DomainError):
        cgf_empirical([1.0], 1.0)


def test_cgf_empirical_converges(rng):
    v, p = np.array([-1.0, 0.5, 2.0]), np.array([0.3, 0.5, 0.2])
    exact = cgf_exact(v, p, 0.8)
    r = np.random.default_rng(4)
    small = abs(cgf_empirical(r.choice(v, size=1000, p=p), 0.8) - exact)
    large = abs(cgf_empirical(r.choice(v, size=100_000, p=p), 0.8) - exact)
    assert large < small
    assert large < 0.01


def test_curve_properties(rng):
    v, p = rng.normal(size=6), rng.dirichlet(np.ones(6))
    for curve in (finite_curve(v, p), subgaussian_curve(2.0), lncosh_curve(1.5)):
        assert curve(0.0) == pytest.approx(0.0, abs=1e-15)
        h = 1e-5
        assert (curve(h) - curve(-h)) / (2 * h) == pytest.approx(0.0, abs=1e-8)
        for a, b in [(0.1, 0.9), (0.5, 3.0), (-1.0, 2.0)]:
            assert curve(0.5 * (a + b)) <= 0.5 * (curve(a) + curve(b)) + 1e-12


def test_sample_conditioned_cgf(rng):
    t = rng.dirichlet(np.ones(12)).reshape(2, 3, 2)
    joint = FiniteJoint(t)
    assert sample_conditioned_cgf(joint, np.full((2, 3), 4.0), 1, 1.3) == pytest.approx(0.0, abs=1e-14)
    f = rng.normal(size=(2, 3))
    for u in range(2):
        cond = t[:, :, u] / t[:, :, u].sum()
        assert sample_conditioned_cgf(joint, f, u, 0.9) == pytest.approx(
            direct_cgf(f.ravel(), cond.ravel(), 0.9), abs=1e-13
        )
    c = 1.5
    sym = np.zeros((2, 2, 1))
    sym[0, 0, 0] = sym[1, 1, 0] = 0.5
    f_sym = np.array([[-c, 0.0], [0.0, c]])
    assert sample_conditioned_cgf(FiniteJoint(sym), f_sym, 0, 0.7) == pytest.approx(math.log(math.cosh(c * 0.7)))


def test_sample_conditioned_cgf_empty_slice():
    t = np.zeros((2, 2, 2))
    t[:, :, 0] = 0.25
    with pytest.raises(DomainError):
        sample_conditioned_cgf(FiniteJoint(t), np.ones((2, 2)), 1, 1.0)


def test_inverse_subgaussian_closed_form(rng):
    for _ in range(100):
        s2, eta = float(rng.uniform(0.01, 10)), float(rng.uniform(0, 5))
        res = inverse_fenchel(subgaussian_curve(s2), eta, tol=1e-12)
        assert res.value == pytest.approx(math.sqrt(2 * s2 * eta), abs=1e-10)


def test_inverse_eta_zero():
    res = inverse_fenchel(lncosh_curve(2.0), 0.0)
    assert res.value == 0.0 and res.limit == "zero"


def test_inverse_eta_infinite():
    assert inverse_fenchel(subgaussian_curve(1.0), math.inf).value == math.inf


@pytest.mark.parametrize("c", [0.3, 1.0, 4.0])
def test_inverse_lncosh_matches_grid(c):
    res = inverse_fenchel(lncosh_curve(c), 0.25)
    oracle = grid_inverse(lambda lam: np.logaddexp(c * lam, -c * lam) - math.log(2), 0.25)
    assert res.value == pytest.approx(oracle, abs=1e-8)


def test_inverse_asymptote_limit():
    # ln cosh never reaches the slope at eta = ln 2: the infimum is the limit c
    res = inverse_fenchel(lncosh_curve(2.0), math.log(2))
    assert res.value == pytest.approx(2.0, abs=1e-10)
    assert res.limit == "infinity"


def test_inverse_bracket_failure():
    # not a CGF: psi(0) != 0 drives the objective to -inf as lam -> 0
    bad = CgfCurve(lambda lam: -2.0 + 0.0 * np.asarray(lam), "closed_form")
    with pytest.raises(NumericError):
        inverse_fenchel(bad, 1.0)


def test_inverse_concave_nondecreasing(rng):
    for _ in range(10):
        curve = finite_curve(rng.normal(size=4), rng.dirichlet(np.ones(4)))
        etas = np.linspace(0, 2, 41)
        vals = np.array([inverse_fenchel(curve, e).value for e in etas])
        assert np.all(np.diff(vals) >= -1e-9)
        assert np.all(vals[1:-1] >= 0.5 * (vals[:-2] + vals[2:]) - 1e-8)


def test_subgaussian_inverse_formula():
    assert subgaussian_inverse_conjugate(0.5, 2.0) == pytest.approx(math.sqrt(2))
    assert subgaussian_inverse_conjugate(3.0, 0.0) == 0.0


def test_lncosh_lower():
    assert lncosh_lower(0.0) == 0.0
    assert lncosh_lower(2.0) == 1.0 and math.log(math.cosh(2.0)) > 1.0
    x = np.linspace(-10, 10, 20_001)
    assert np.all(lncosh_lower(x) <= np.log(np.cosh(x)) + 1e-15)


def test_batch_matches_scalar(rng):
    v = rng.normal(size=(12, 5))
    p = rng.dirichlet(np.ones(5), size=12)
    eta = rng.uniform(0, 1, size=12)
    psi, slope = finite_family(v, p)
    batch = inverse_fenchel_batch(psi, eta, slope)
    scalar = [inverse_fenchel(finite_curve(v[k], p[k]), eta[k], tol=1e-12).value for k in range(12)]
    assert np.allclose(batch, scalar, atol=1e-9)


def test_average_curve_is_weighted_sum(rng):
    a, b = lncosh_curve(1.0), subgaussian_curve(2.0)
    avg = average_curve([a, b], [0.25, 0.75])
    assert avg(0.8) == pytest.approx(0.25 * a(0.8) + 0.75 * b(0.8))


def test_empirical_curve_trust_flag():
    x = np.random.default_rng(0).standard_normal(200)
    curve = empirical_curve(x)
    assert 0 < curve.lam_max < math.inf
    res = inverse_fenchel(curve, 3.0)
    assert res.argmin > curve.lam_max and res.warning is not None


def test_conjugate_bounds_decoupling_gap(rng):
    """E_P[F] - E_Q[F] is bounded by the inverse conjugate of F under Q at KL(P||Q)."""
    for _ in range(30):
        joint = FiniteJoint(rng.dirichlet(np.ones(9)).reshape(3, 3))
        dec = decouple(joint).decoupled
        f = rng.uniform(-1, 1, size=(3, 3))
        gap = float(np.sum(joint.table * f) - np.sum(dec.table * f))
        kl = kl_divergence(joint.table.ravel(), dec.table.ravel())
        assert gap <= inverse_fenchel(finite_curve(f.ravel(), dec.table.ravel()), kl).value + 1e-10
        assert gap <= inverse_fenchel(conditional_curve(FiniteJoint(dec.table[:, :, None]), f, 0), kl).value + 1e-10
