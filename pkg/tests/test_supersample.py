import itertools

import numpy as np
import pytest

from conftest import random_problems
from genbound.core_model import GaussianProblem, deterministic_learner
from genbound.errors import DomainError, ResourceError
from genbound.info_measures import FiniteJoint, kl_divergence, sample_conditioned_mi
from genbound.supersample import (
    SupersampleState,
    SupersampleWorld,
    build_supersample,
    decouple,
    gen_error_supersample_identity,
)


def test_state_invariant():
    table = np.array([[0, 1], [1, 1]])
    with pytest.raises(DomainError):
        SupersampleState(table, np.array([1, -1]), np.array([0, 1]), 0)


def test_build_deterministic(small_problem):
    a = build_supersample(small_problem, np.random.default_rng(5))
    b = build_supersample(small_problem, np.random.default_rng(5))
    assert np.array_equal(a.table, b.table) and np.array_equal(a.r_vec, b.r_vec) and a.w == b.w


def test_gaussian_state_average():
    s = build_supersample(GaussianProblem(1.0, 5), np.random.default_rng(1))
    assert s.w == np.mean(s.train_vec)


def test_selectors_fair(small_problem):
    r = np.random.default_rng(3)
    m = 100_000
    signs = np.array([build_supersample(small_problem, r).r_vec for _ in range(m)])
    assert np.all(np.abs((signs > 0).mean(axis=0) - 0.5) < 4 / np.sqrt(m))


def test_decouple_fixed_point():
    pu = np.array([0.4, 0.6])
    t = np.stack([np.outer([0.2, 0.8], [0.5, 0.5]) * pu[0], np.outer([0.7, 0.3], [0.1, 0.9]) * pu[1]], axis=2)
    assert np.allclose(decouple(FiniteJoint(t)).decoupled.table, t, atol=1e-16)


def test_decouple_copy_of_bit():
    dec = decouple(FiniteJoint(np.eye(2) / 2)).decoupled
    assert np.allclose(dec.table, 0.25)


def test_decouple_marginals_and_identity(rng):
    for _ in range(50):
        shape = tuple(int(k) for k in rng.integers(2, 5, size=3))
        joint = FiniteJoint(rng.dirichlet(np.ones(np.prod(shape))).reshape(shape))
        d = decouple(joint)
        t, q = joint.table, d.decoupled.table
        assert np.allclose(t.sum(axis=1), q.sum(axis=1), atol=1e-14)
        assert np.allclose(t.sum(axis=0), q.sum(axis=0), atol=1e-14)
        assert np.all(sample_conditioned_mi(d.decoupled).values() == 0.0)
        sc = sample_conditioned_mi(joint)
        for u, iu, pu in sc.per_u:
            assert kl_divergence(t[:, :, u] / pu, q[:, :, u] / q[:, :, u].sum()) == pytest.approx(iu, abs=1e-12)


def test_identity_constant_learner(constant_problem):
    lhs, rhs = gen_error_supersample_identity(constant_problem)
    assert lhs == pytest.approx(0.0, abs=1e-15) and rhs == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("problem", random_problems(8, seed=11))
def test_identity_random(problem):
    lhs, rhs = gen_error_supersample_identity(problem)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_identity_majority_vote():
    p = deterministic_learner([0.35, 0.65], [[0.0, 1.0], [1.0, 0.0]], 3, lambda z: int(sum(z) >= 2))
    lhs, rhs = gen_error_supersample_identity(p)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert lhs > 0


def test_world_over_budget(small_problem):
    with pytest.raises(ResourceError):
        SupersampleWorld(small_problem, budget=10)


def test_world_marginals(small_problem):
    w = SupersampleWorld(small_problem)
    assert w.prob.sum() == pytest.approx(1.0, abs=1e-12)
    r_marg = w.prob.sum(axis=(0, 2))
    assert np.allclose(r_marg, 1 / 2 ** small_problem.n)


def test_world_joint_matches_loop(small_problem):
    """(W, R_i, column) joint rebuilt by looping over every state."""
    p = small_problem
    w = SupersampleWorld(p)
    xi = p.xi.probabilities
    k, n = p.kz, p.n
    loop = np.zeros((p.kw, 2, k * k))
    for zm in itertools.product(range(k), repeat=n):
        for zp in itertools.product(range(k), repeat=n):
            pt = np.prod([xi[z] for z in zm + zp])
            for r in itertools.product((0, 1), repeat=n):
                train = tuple(zp[i] if r[i] else zm[i] for i in range(n))
                row = p.kernel[p.train_index(train)]
                loop[:, r[0], zm[0] * k + zp[0]] += pt * row / 2 ** n
    assert np.allclose(w.joint_w_ri_given_column(0).table, loop, atol=1e-15)


def test_decoupled_gap_has_zero_mean(small_problem):
    w = SupersampleWorld(small_problem)
    for i in range(small_problem.n):
        dec = decouple(w.joint_w_ri_given_column(i)).decoupled
        assert float(np.sum(dec.table * w.f_ri_column(i))) == pytest.approx(0.0, abs=1e-15)


def test_supersample_form_per_index(small_problem):
    from genbound.core_model import gen_error_terms

    w = SupersampleWorld(small_problem)
    terms = gen_error_terms(small_problem)
    for i in range(small_problem.n):
        val = float(np.sum(w.joint_w_ri_given_column(i).table * w.f_ri_column(i)))
        assert val == pytest.approx(terms[i], abs=1e-14)
