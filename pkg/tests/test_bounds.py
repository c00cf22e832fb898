import math

import numpy as np
import pytest

from conftest import random_problems
from genbound.bounds import (
    all_bounds,
    cimi_bound,
    cmi_bound,
    compare_bounds,
    decoupling_conjugates,
    expected_delta_squared,
    icimi_bound,
    icimi_bounded_loss,
    imi_bound,
    info_ordering,
    mi_bound,
    strengthened_cimi,
    strengthened_cmi,
    table1_report,
)
from genbound.core_model import GaussianProblem, deterministic_learner, random_finite_problem, true_gen_error
from genbound.errors import DomainError
from genbound.info_measures import FiniteJoint
from genbound.reports import AVERAGED, INAPPLICABLE, SAMPLE_CONDITIONED, BoundComparison
from genbound.supersample import SupersampleWorld

PROBLEMS = random_problems(12, seed=21)


def test_constant_learner_all_zero(constant_problem):
    for r in all_bounds(constant_problem):
        assert r.value == pytest.approx(0.0, abs=1e-12), r.key()
    rows = table1_report(constant_problem).rows
    assert all(abs(r.value) < 1e-12 and abs(r.special_case) < 1e-12 for r in rows)


@pytest.mark.parametrize("problem", PROBLEMS)
def test_soundness(problem):
    gen = true_gen_error(problem).value
    for r in all_bounds(problem):
        assert r.value >= gen - 1e-9, r.key()
        assert all(i >= 0 for i in r.info_terms)


@pytest.mark.parametrize("problem", PROBLEMS)
def test_sample_conditioned_below_averaged(problem):
    w = SupersampleWorld(problem)
    assert icimi_bound(problem, SAMPLE_CONDITIONED, world=w).value <= icimi_bound(problem, AVERAGED, world=w).value + 1e-12
    assert cimi_bound(problem, SAMPLE_CONDITIONED, world=w).value <= cimi_bound(problem, AVERAGED, world=w).value + 1e-12
    assert (strengthened_cimi(problem, SAMPLE_CONDITIONED, world=w).value
            <= strengthened_cimi(problem, AVERAGED, world=w).value + 1e-12)


@pytest.mark.parametrize("problem", PROBLEMS)
def test_bounded_loss_relaxes_exact(problem):
    cor = icimi_bounded_loss(problem, 0.0, 1.0)
    assert cor.value <= cor.extras["averaged"] + 1e-12
    assert icimi_bound(problem).value <= cor.value + 1e-12


def test_mi_bound_formula(small_problem):
    r = mi_bound(small_problem, sigma2_loss=0.25)
    assert r.value == pytest.approx(math.sqrt(2 * 0.25 / small_problem.n * r.info_term))


def test_mi_gaussian_infinite():
    r = mi_bound(GaussianProblem(1.0, 10))
    assert r.value == math.inf and "infinite_mi" in r.flags


def test_imi_envelopes(small_problem):
    exact = imi_bound(small_problem, "exact")
    sub = imi_bound(small_problem, "subgaussian")
    assert exact.info_terms == pytest.approx(sub.info_terms, abs=1e-14)
    # per-w Hoeffding ranges do not dominate the joint CGF; the global range does
    lo, hi = small_problem.loss_range()
    glob = np.mean([math.sqrt(2 * (hi - lo) ** 2 / 4 * i) for i in exact.info_terms])
    assert exact.value <= glob + 1e-12
    gen = true_gen_error(small_problem).value
    assert min(exact.value, sub.value) >= gen - 1e-12
    with pytest.raises(DomainError):
        imi_bound(small_problem, "weird")


def test_imi_gaussian_closed_form():
    r = imi_bound(GaussianProblem(1.0, 50))
    assert r.info_term == pytest.approx(0.5 * math.log(50 / 49))
    assert r.value == pytest.approx(math.sqrt(2 * (51 / 50) ** 2 * math.log(50 / 49)), abs=1e-12)


def test_cmi_gaussian_inapplicable():
    r = cmi_bound(GaussianProblem(1.0, 10))
    assert r.status == INAPPLICABLE and math.isnan(r.value) and not r.applicable


def test_cmi_formula(small_problem):
    r = cmi_bound(small_problem)
    d2 = expected_delta_squared(small_problem)
    assert r.value == pytest.approx(math.sqrt(2 / small_problem.n * d2 * r.info_term))
    r1 = cmi_bound(small_problem, delta=1.0)
    assert r1.value >= r.value - 1e-15


def test_delta_squared_by_loop(small_problem):
    L, xi = small_problem.loss, small_problem.xi.probabilities
    k = small_problem.kz
    loop = sum(xi[a] * xi[b] * max(abs(L[w, a] - L[w, b]) for w in range(L.shape[0])) ** 2
               for a in range(k) for b in range(k))
    assert expected_delta_squared(small_problem) == pytest.approx(loop, abs=1e-15)


def test_cimi_requires_unit_loss():
    p = random_finite_problem(np.random.default_rng(0), 2, 2, 1, loss_range=(0.0, 3.0))
    with pytest.raises(DomainError):
        cimi_bound(p)
    with pytest.raises(DomainError):
        cimi_bound(GaussianProblem(1.0, 3))
    # the strengthened form has no range requirement
    assert strengthened_cimi(p).value >= true_gen_error(p).value - 1e-9


def test_bounded_loss_range_checked(small_problem):
    with pytest.raises(DomainError):
        icimi_bounded_loss(small_problem, 0.2, 0.5)
    with pytest.raises(DomainError):
        icimi_bounded_loss(small_problem, 1.0, 0.0)


def test_bounded_loss_equal_endpoints():
    p = deterministic_learner([0.5, 0.5], np.full((2, 2), 0.3), 1, lambda z: z[0])
    assert icimi_bounded_loss(p, 0.3, 0.3).value == 0.0


def test_bounded_loss_one_sample_by_hand():
    """Binary data, n=1, learner copies its sample; every column with z- != z+
    reveals R exactly, so I_u = ln 2 there and 0 on the diagonal."""
    q = 0.3
    p = deterministic_learner([q, 1 - q], [[0.0, 1.0], [1.0, 0.0]], 1, lambda z: z[0])
    hand = (1.0 - 0.0) * 2 * q * (1 - q) * math.sqrt(2 * math.log(2))
    assert icimi_bounded_loss(p, 0.0, 1.0).value == pytest.approx(hand, abs=1e-12)


def test_table1_matches_reports(small_problem):
    table = table1_report(small_problem)
    rows = {r.approach: r for r in table.rows}
    assert rows["IMI"].value == pytest.approx(imi_bound(small_problem).value, abs=1e-14)
    assert rows["ICIMI"].value == pytest.approx(icimi_bound(small_problem, AVERAGED).value, abs=1e-14)
    assert rows["CIMI"].special_case == pytest.approx(cimi_bound(small_problem, AVERAGED).value, abs=1e-14)
    mi = mi_bound(small_problem).info_term
    assert rows["MI"].special_case == pytest.approx(math.sqrt(mi / (2 * small_problem.n)))
    assert rows["CMI"].special_case == pytest.approx(cmi_bound(small_problem, delta=1.0).value)
    text = table.format()
    assert "ICIMI" in text and "Delta = 1" in text


def test_table1_special_case_needs_unit_loss():
    p = random_finite_problem(np.random.default_rng(0), 2, 2, 1, loss_range=(0.0, 3.0))
    assert all(math.isnan(r.special_case) for r in table1_report(p).rows)


@pytest.mark.parametrize("problem", PROBLEMS)
def test_info_orderings(problem):
    o = info_ordering(problem)
    for c, t, ind in zip(o.column, o.table, o.individual):
        assert c <= t + 1e-12
        assert c <= ind + 1e-12


@pytest.mark.parametrize("problem", PROBLEMS)
def test_compare_bounds_no_violations(problem):
    cmp = compare_bounds(problem)
    assert cmp.ok, cmp.violations()
    assert len(cmp.pairs) >= 2 * problem.n + 1


def test_comparison_reports_violation():
    cmp = BoundComparison([("a", "b", 2.0, 1.0, "<="), ("c", "d", 1.0, 2.0, ">=")])
    assert len(cmp.violations()) == 2 and not cmp.ok


def test_decoupling_terms_independent_joint(rng):
    t = np.stack([np.outer(rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(2))) * 0.5 for _ in range(2)], axis=2)
    d = decoupling_conjugates(FiniteJoint(t), rng.uniform(-1, 1, size=(3, 2)))
    assert d.gap == pytest.approx(0.0, abs=1e-15)
    assert d.strong == 0.0 and d.weak == 0.0


def test_decoupling_terms_chain(rng):
    for _ in range(30):
        shape = tuple(int(k) for k in rng.integers(2, 5, size=3))
        joint = FiniteJoint(rng.dirichlet(np.ones(np.prod(shape))).reshape(shape))
        f = rng.uniform(-1, 1, size=shape[:2])
        for sign in (1.0, -1.0):
            d = decoupling_conjugates(joint, f, sign)
            assert d.gap <= d.strong + 1e-10
            assert d.strong <= d.weak + 1e-10


def test_gaussian_bounds_route():
    g = GaussianProblem(1.0, 100)
    reports = all_bounds(g, mc={"mc_samples": 2000, "seed": 1})
    names = [r.bound_name for r in reports]
    assert names == ["MI", "IMI", "CMI", "ICIMI"]
    with pytest.raises(DomainError):
        icimi_bounded_loss(g, 0.0, 1.0)


@pytest.mark.parametrize("problem", PROBLEMS[:6])
def test_strengthened_cmi_chain(problem):
    r = strengthened_cmi(problem)
    assert true_gen_error(problem).value <= r.value + 1e-10
    assert r.value <= r.extras["averaged"] + 1e-10
