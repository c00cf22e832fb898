import numpy as np
import pytest

from genbound.core_model import FiniteDistribution, FiniteProblem, constant_learner, random_finite_problem


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_problem():
    return random_finite_problem(np.random.default_rng(7), 2, 3, 2)


@pytest.fixture
def constant_problem():
    xi = FiniteDistribution([0.3, 0.7])
    loss = np.array([[0.2, 0.9], [0.5, 0.1]])
    return constant_learner(xi, loss, 2, w=1)


def random_problems(count, seed=0, max_kz=3, max_kw=3, max_n=2):
    """Small random problems with alphabet sizes and n drawn per instance."""
    out = []
    for child in np.random.SeedSequence(seed).spawn(count):
        r = np.random.default_rng(child)
        kz = int(r.integers(2, max_kz + 1))
        kw = int(r.integers(2, max_kw + 1))
        n = int(r.integers(1, max_n + 1))
        out.append(random_finite_problem(r, kz, kw, n))
    return out


def brute_gen_error(problem: FiniteProblem) -> float:
    """Direct double loop over training vectors and hypotheses."""
    import itertools

    xi = problem.xi.probabilities
    pop = [sum(problem.loss[w, z] * xi[z] for z in range(problem.kz)) for w in range(problem.kw)]
    total = 0.0
    for t, z in enumerate(itertools.product(range(problem.kz), repeat=problem.n)):
        pz = np.prod([xi[v] for v in z])
        for w in range(problem.kw):
            pw = problem.kernel[t, w]
            emp = sum(problem.loss[w, v] for v in z) / problem.n
            total += pz * pw * (pop[w] - emp)
    return total


# PASS/FAIL lines recorded by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
