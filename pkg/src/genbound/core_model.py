"""Learning problems, sampling and the ground-truth generalization error.

Two data models are supported:

* :class:`FiniteProblem` -- finite data and hypothesis alphabets, a dense
  loss table ``loss[w, z]`` and a tabular learner ``kernel[t, w]`` where ``t``
  is the row-major index of the training vector ``(z_1, ..., z_n)``.
* :class:`GaussianProblem` -- i.i.d. ``N(mu, sigma2)`` data, the averaging
  learner ``W = mean(Z)`` and squared loss.

Alphabets are index based (``0..k-1``); string labels are carried along for
display and file round-trips only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, ResourceError, UnsupportedMethodError
from . import montecarlo

PROB_TOL = 1e-12
DEFAULT_BUDGET = 10_000_000

EXACT = "exact_enumeration"
MONTE_CARLO = "monte_carlo"
CLOSED_FORM = "closed_form"
GEN_METHODS = (EXACT, MONTE_CARLO, CLOSED_FORM)


def _as_prob_vector(p, what="probabilities") -> np.ndarray:
    arr = np.array(p, dtype=float).ravel()
    if arr.size == 0:
        raise DomainError(f"{what}: empty vector")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError(f"{what}: entries must be finite and nonnegative")
    if abs(arr.sum() - 1.0) > PROB_TOL * max(1, arr.size):
        raise DomainError(f"{what}: entries sum to {arr.sum()!r}, not 1")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FiniteDistribution:
    """A probability vector over ``0..k-1``."""

    probabilities: np.ndarray
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "probabilities", _as_prob_vector(self.probabilities))
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != self.probabilities.size:
                raise DomainError("label count does not match alphabet size")
            object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return int(self.probabilities.size)

    def __len__(self):
        return self.size


@dataclass(frozen=True)
class FiniteProblem:
    """A fully specified finite learning problem.

    ``loss`` has shape ``(|W|, |Z|)`` and ``kernel`` has shape
    ``(|Z|**n, |W|)`` with stochastic rows.
    """

    xi: FiniteDistribution
    loss: np.ndarray
    kernel: np.ndarray
    n: int
    labels_w: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if not isinstance(self.xi, FiniteDistribution):
            object.__setattr__(self, "xi", FiniteDistribution(self.xi))
        n = int(self.n)
        if n < 1:
            raise DomainError("n must be a positive integer")
        object.__setattr__(self, "n", n)
        loss = np.array(self.loss, dtype=float)
        if loss.ndim != 2 or loss.shape[1] != self.xi.size:
            raise DomainError(f"loss table must be |W| x |Z|, got {loss.shape}")
        if not np.all(np.isfinite(loss)):
            raise DomainError("loss table must be finite")
        kernel = np.array(self.kernel, dtype=float)
        expected = (self.xi.size ** n, loss.shape[0])
        if kernel.shape != expected:
            raise DomainError(f"learner kernel must have shape {expected}, got {kernel.shape}")
        if np.any(kernel < 0) or np.any(np.abs(kernel.sum(axis=1) - 1.0) > PROB_TOL * kernel.shape[1]):
            raise DomainError("learner kernel rows must be probability vectors")
        loss.setflags(write=False)
        kernel.setflags(write=False)
        object.__setattr__(self, "loss", loss)
        object.__setattr__(self, "kernel", kernel)
        if self.labels_w is not None:
            labels = tuple(str(s) for s in self.labels_w)
            if len(labels) != loss.shape[0]:
                raise DomainError("hypothesis label count does not match |W|")
            object.__setattr__(self, "labels_w", labels)

    @property
    def kz(self) -> int:
        return self.xi.size

    @property
    def kw(self) -> int:
        return int(self.loss.shape[0])

    def loss_fn(self, w: int, z: int) -> float:
        return float(self.loss[w, z])

    def train_shape(self) -> Tuple[int, ...]:
        return (self.kz,) * self.n

    def train_index(self, z_vec: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(int(z) for z in z_vec), self.train_shape()))

    def train_probs(self) -> np.ndarray:
        """Probability of every training vector, in kernel-row order."""
        p = np.ones(1)
        for _ in range(self.n):
            p = np.multiply.outer(p, self.xi.probabilities).ravel()
        return p

    def train_vectors(self) -> np.ndarray:
        """``(|Z|**n, n)`` array of every training vector, in kernel-row order."""
        grid = np.indices(self.train_shape()).reshape(self.n, -1)
        return grid.T

    def loss_range(self) -> Tuple[float, float]:
        return float(self.loss.min()), float(self.loss.max())

    def subgaussian_variance(self) -> float:
        """Hoeffding certificate: ``l(w, Z)`` is ``max_w range_w**2/4``-sub-Gaussian."""
        support = self.xi.probabilities > 0
        spans = self.loss[:, support].max(axis=1) - self.loss[:, support].min(axis=1)
        return float(spans.max() ** 2 / 4.0)

    def check_budget(self, states: int, budget: int = DEFAULT_BUDGET):
        if states > budget:
            raise ResourceError(f"enumeration needs {states} states, budget is {budget}")


@dataclass(frozen=True)
class GaussianProblem:
    """Mean estimation of ``N(mu, sigma2)`` by averaging, under squared loss."""

    sigma2: float = 1.0
    n: int = 2
    mu: float = 0.0

    def __post_init__(self):
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise DomainError("sigma2 must be a positive real")
        if int(self.n) < 1:
            raise DomainError("n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @staticmethod
    def loss_fn(w, z):
        return (np.asarray(w) - np.asarray(z)) ** 2

    @staticmethod
    def learner(z_vec) -> float:
        return float(np.mean(z_vec))


LearningProblem = Union[FiniteProblem, GaussianProblem]


@dataclass(frozen=True)
class GenErrorEstimate:
    value: float
    std_error: float = 0.0
    method: str = EXACT

    def __post_init__(self):
        if self.method not in GEN_METHODS:
            raise DomainError(f"unknown method {self.method!r}")
        if self.method != MONTE_CARLO and self.std_error != 0.0:
            raise DomainError("exact and closed-form estimates carry no standard error")


def population_loss(w, problem: LearningProblem) -> float:
    """Expected loss of hypothesis ``w`` under the data distribution."""
    if isinstance(problem, GaussianProblem):
        return float((w - problem.mu) ** 2 + problem.sigma2)
    if not (isinstance(w, (int, np.integer)) and 0 <= w < problem.kw):
        raise DomainError(f"unknown hypothesis symbol {w!r}")
    return float(problem.loss[w] @ problem.xi.probabilities)


def empirical_loss(w, z_vec, problem: LearningProblem) -> float:
    """Average loss of ``w`` over the sample vector ``z_vec``."""
    z = np.asarray(z_vec)
    if z.size == 0:
        raise DomainError("empty sample vector")
    if isinstance(problem, GaussianProblem):
        return float(np.mean((w - z) ** 2))
    if not (isinstance(w, (int, np.integer)) and 0 <= w < problem.kw):
        raise DomainError(f"unknown hypothesis symbol {w!r}")
    return float(np.mean(problem.loss[w, z.astype(int)]))


def gen_error_terms(problem: FiniteProblem, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """Per-sample terms ``E[l(W~, Z~_i)] - E[l(W, Z_i)]`` by enumeration.

    ``W~`` and ``Z~_i`` are independent copies of ``W`` and ``Z_i``; the
    generalization error is the mean of the returned vector.
    """
    problem.check_budget(problem.kz ** problem.n * problem.kw, budget)
    p_t = problem.train_probs()
    joint = p_t[:, None] * problem.kernel  # P(t, w)
    p_w = joint.sum(axis=0)
    decoupled = float(p_w @ problem.loss @ problem.xi.probabilities)
    zs = problem.train_vectors()
    terms = np.empty(problem.n)
    for i in range(problem.n):
        # loss[w, z_i(t)] arranged as (t, w)
        per = problem.loss[:, zs[:, i]].T
        terms[i] = decoupled - float(np.sum(joint * per))
    return terms


def sample_problem(problem: LearningProblem, rng: np.random.Generator):
    """Draw a training vector and the learner's hypothesis for it."""
    if isinstance(problem, GaussianProblem):
        z = problem.mu + problem.sigma * rng.standard_normal(problem.n)
        return z, float(z.mean())
    z = rng.choice(problem.kz, size=problem.n, p=problem.xi.probabilities)
    row = problem.kernel[problem.train_index(z)]
    w = int(rng.choice(problem.kw, p=row))
    return z, w


def _gaussian_gen_chunk(problem: GaussianProblem):
    def run(rng, size):
        z = problem.mu + problem.sigma * rng.standard_normal((size, problem.n))
        w = z.mean(axis=1)
        pop = (w - problem.mu) ** 2 + problem.sigma2
        emp = np.mean((w[:, None] - z) ** 2, axis=1)
        return pop - emp

    return run


def _finite_gen_chunk(problem: FiniteProblem):
    pop = problem.loss @ problem.xi.probabilities
    cdf = np.cumsum(problem.kernel, axis=1)

    def run(rng, size):
        z = rng.choice(problem.kz, size=(size, problem.n), p=problem.xi.probabilities)
        t = np.ravel_multi_index(tuple(z.T), problem.train_shape())
        u = rng.random(size)
        w = np.minimum((cdf[t] < u[:, None]).sum(axis=1), problem.kw - 1)
        emp = problem.loss[w[:, None], z].mean(axis=1)
        return pop[w] - emp

    return run


def true_gen_error(
    problem: LearningProblem,
    method: str = EXACT,
    mc_samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> GenErrorEstimate:
    """Expected generalization error ``E[L_xi(W) - L_Z(W)]``."""
    if method not in GEN_METHODS:
        raise UnsupportedMethodError(f"unknown method {method!r}")
    if method == MONTE_CARLO:
        if mc_samples is None or seed is None:
            raise DomainError("monte_carlo needs mc_samples and seed")
        if isinstance(problem, GaussianProblem):
            fn = _gaussian_gen_chunk(problem)
        else:
            fn = _finite_gen_chunk(problem)
        draws = np.concatenate(montecarlo.run_chunked(fn, int(mc_samples), seed))
        value, se = montecarlo.batch_means(draws)
        return GenErrorEstimate(value, se, MONTE_CARLO)
    if isinstance(problem, GaussianProblem):
        if method == EXACT:
            raise UnsupportedMethodError("exact enumeration needs a finite problem")
        return GenErrorEstimate(2.0 * problem.sigma2 / problem.n, 0.0, CLOSED_FORM)
    if method == CLOSED_FORM:
        raise UnsupportedMethodError("no closed form for a general finite problem")
    return GenErrorEstimate(float(gen_error_terms(problem).mean()), 0.0, EXACT)


# ---------------------------------------------------------------------------
# construction helpers
# ---------------------------------------------------------------------------


def constant_learner(xi, loss, n: int, w: int = 0) -> FiniteProblem:
    """A learner that outputs ``w`` regardless of the data."""
    loss = np.asarray(loss, dtype=float)
    kz = np.asarray(xi.probabilities if isinstance(xi, FiniteDistribution) else xi).size
    kernel = np.zeros((kz ** n, loss.shape[0]))
    kernel[:, w] = 1.0
    return FiniteProblem(xi, loss, kernel, n)


def deterministic_learner(xi, loss, n: int, rule) -> FiniteProblem:
    """Tabulate a deterministic map ``rule(z_vec) -> w``."""
    loss = np.asarray(loss, dtype=float)
    xi = xi if isinstance(xi, FiniteDistribution) else FiniteDistribution(xi)
    kernel = np.zeros((xi.size ** n, loss.shape[0]))
    for t, z in enumerate(np.indices((xi.size,) * n).reshape(n, -1).T):
        kernel[t, int(rule(tuple(int(v) for v in z)))] = 1.0
    return FiniteProblem(xi, loss, kernel, n)


def random_finite_problem(
    rng: np.random.Generator,
    kz: int,
    kw: int,
    n: int,
    loss_range: Tuple[float, float] = (0.0, 1.0),
) -> FiniteProblem:
    """Flat-Dirichlet data law and kernel rows, uniform loss table."""
    xi = rng.dirichlet(np.ones(kz))
    kernel = rng.dirichlet(np.ones(kw), size=kz ** n)
    lo, hi = loss_range
    loss = rng.uniform(lo, hi, size=(kw, kz))
    return FiniteProblem(FiniteDistribution(xi), loss, kernel, n)


# ---------------------------------------------------------------------------
# problem description files
# ---------------------------------------------------------------------------

GAUSSIAN_AVERAGER = "gaussian_averager"


def problem_from_dict(d: dict) -> LearningProblem:
    try:
        n = int(d["n"])
        learner = d["learner"]
    except KeyError as exc:
        raise DomainError(f"problem description lacks field {exc.args[0]!r}") from None
    if learner == GAUSSIAN_AVERAGER:
        return GaussianProblem(sigma2=float(d.get("sigma2", 1.0)), n=n, mu=float(d.get("mu", 0.0)))
    for key in ("xi", "loss"):
        if key not in d:
            raise DomainError(f"problem description lacks field {key!r}")
    labels_z = d.get("alphabet_z")
    labels_w = d.get("alphabet_w")
    xi = FiniteDistribution(d["xi"], tuple(labels_z) if labels_z is not None else None)
    return FiniteProblem(xi, d["loss"], learner, n, tuple(labels_w) if labels_w is not None else None)


def problem_to_dict(problem: LearningProblem) -> dict:
    if isinstance(problem, GaussianProblem):
        return {"learner": GAUSSIAN_AVERAGER, "n": problem.n, "mu": problem.mu, "sigma2": problem.sigma2}
    return {
        "alphabet_z": list(problem.xi.labels or [str(i) for i in range(problem.kz)]),
        "alphabet_w": list(problem.labels_w or [str(i) for i in range(problem.kw)]),
        "xi": problem.xi.probabilities.tolist(),
        "loss": problem.loss.tolist(),
        "learner": problem.kernel.tolist(),
        "n": problem.n,
    }


def load_problem(path) -> LearningProblem:
    with open(Path(path)) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"{path}: not valid JSON ({exc})") from None
    return problem_from_dict(data)


def save_problem(problem: LearningProblem, path):
    Path(path).write_text(json.dumps(problem_to_dict(problem), indent=2))
