"""Supersample construction (a 2 x n table plus Rademacher selectors) and
conditional decoupling of finite joints.

For finite problems :class:`SupersampleWorld` materializes the exact law of
``(Z^-_[n], Z^+_[n], R_[n], W)`` as a dense tensor and exposes the
``(W, Y, U)`` joints every bound needs. ``U`` is either the full table or a
single column ``Z_i^+-``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Tuple

import numpy as np

from .core_model import (
    DEFAULT_BUDGET,
    FiniteProblem,
    GaussianProblem,
    LearningProblem,
    true_gen_error,
)
from .errors import DomainError
from .info_measures import FiniteJoint


@dataclass(frozen=True)
class SupersampleState:
    """One draw of the supersample: ``table[0]`` holds ``Z^-``, ``table[1]`` holds ``Z^+``."""

    table: np.ndarray
    r_vec: np.ndarray
    train_vec: np.ndarray
    w: Any

    def __post_init__(self):
        sel = np.where(self.r_vec > 0, self.table[1], self.table[0])
        if not np.array_equal(sel, self.train_vec):
            raise DomainError("training vector does not match the selected table entries")


def build_supersample(problem: LearningProblem, rng: np.random.Generator) -> SupersampleState:
    n = problem.n
    if isinstance(problem, GaussianProblem):
        table = problem.mu + problem.sigma * rng.standard_normal((2, n))
    else:
        table = rng.choice(problem.kz, size=(2, n), p=problem.xi.probabilities)
    r_vec = rng.choice(np.array([-1, 1]), size=n)
    train = np.where(r_vec > 0, table[1], table[0])
    if isinstance(problem, GaussianProblem):
        w = float(train.mean())
    else:
        row = problem.kernel[problem.train_index(train)]
        w = int(rng.choice(problem.kw, p=row))
    for arr in (table, r_vec, train):
        arr.setflags(write=False)
    return SupersampleState(table, r_vec, train, w)


@dataclass(frozen=True)
class DecoupledJoint:
    original: FiniteJoint
    decoupled: FiniteJoint


def decouple(joint: FiniteJoint) -> DecoupledJoint:
    """Replace ``P(x, y | u)`` by ``P(x | u) P(y | u)``, keeping both pair marginals."""
    if not isinstance(joint, FiniteJoint):
        joint = FiniteJoint(joint)
    t = joint.as_conditional()
    pu = t.sum(axis=(0, 1))
    pxu = t.sum(axis=1, keepdims=True)
    pyu = t.sum(axis=0, keepdims=True)
    safe = np.where(pu > 0, pu, 1.0)
    dec = pxu * pyu / safe
    if not joint.conditioned:
        dec = dec[:, :, 0]
    return DecoupledJoint(joint, FiniteJoint(dec, joint.labels))


def joint_w_train(problem: FiniteProblem) -> FiniteJoint:
    """``(W, Z_[n])`` over training vectors, in kernel-row order."""
    return FiniteJoint((problem.train_probs()[:, None] * problem.kernel).T, ("W", "Z"))


def joint_w_zi(problem: FiniteProblem, i: int) -> FiniteJoint:
    """``(W, Z_i)``."""
    pt = (problem.train_probs()[:, None] * problem.kernel).T  # (W, t)
    zi = problem.train_vectors()[:, i]
    out = np.stack([pt[:, zi == z].sum(axis=1) for z in range(problem.kz)], axis=1)
    return FiniteJoint(out, ("W", "Z_i"))


class SupersampleWorld:
    """Exact joint law of the supersample construction for a finite problem.

    The internal tensor ``prob[T, R, W]`` indexes tables ``T`` row-major over
    ``(z^-_1..z^-_n, z^+_1..z^+_n)`` and selectors ``R`` row-major over
    ``(r_1..r_n)`` with bit 0 meaning ``-1``.
    """

    def __init__(self, problem: FiniteProblem, budget: int = DEFAULT_BUDGET):
        if not isinstance(problem, FiniteProblem):
            raise DomainError("SupersampleWorld needs a finite problem")
        k, n, m = problem.kz, problem.n, problem.kw
        problem.check_budget(k ** (2 * n) * 2 ** n * m, budget)
        self.problem = problem
        self.k, self.n, self.m = k, n, m
        grid = np.indices((k,) * (2 * n)).reshape(2 * n, -1).T
        self.zm = grid[:, :n]
        self.zp = grid[:, n:]
        xi = problem.xi.probabilities
        self.p_table = np.prod(xi[grid], axis=1)
        self.r_bits = np.indices((2,) * n).reshape(n, -1).T
        self.r_sign = 2 * self.r_bits - 1
        shape = problem.train_shape()
        prob = np.empty((grid.shape[0], 2 ** n, m))
        for r, bits in enumerate(self.r_bits):
            train = np.where(bits.astype(bool), self.zp, self.zm)
            rows = np.ravel_multi_index(tuple(train.T), shape)
            prob[:, r, :] = self.p_table[:, None] * problem.kernel[rows] / 2 ** n
        self.prob = prob

    @property
    def n_tables(self) -> int:
        return self.prob.shape[0]

    # -- joints ---------------------------------------------------------

    def joint_w_rvec_given_table(self) -> FiniteJoint:
        """``(W, R_[n], Z^+-_[n])``."""
        return FiniteJoint(self.prob.transpose(2, 1, 0), ("W", "R", "Zpm"))

    def _ri_given_table(self, i: int) -> np.ndarray:
        split = self.prob.reshape((self.n_tables,) + (2,) * self.n + (self.m,))
        others = tuple(1 + j for j in range(self.n) if j != i)
        t = split.sum(axis=others)  # (T, 2, W)
        return t.transpose(2, 1, 0)

    def joint_w_ri_given_table(self, i: int) -> FiniteJoint:
        """``(W, R_i, Z^+-_[n])``."""
        return FiniteJoint(self._ri_given_table(i), ("W", "R_i", "Zpm"))

    def joint_w_ri_given_column(self, i: int) -> FiniteJoint:
        """``(W, R_i, Z_i^+-)`` with column index ``u = z^-_i * |Z| + z^+_i``."""
        t = self._ri_given_table(i)  # (W, 2, T)
        cols = self.zm[:, i] * self.k + self.zp[:, i]
        out = np.zeros((self.m, 2, self.k * self.k))
        for c in range(self.k * self.k):
            out[:, :, c] = t[:, :, cols == c].sum(axis=2)
        return FiniteJoint(out, ("W", "R_i", "Z_i"))

    def joint_w_train(self) -> FiniteJoint:
        return joint_w_train(self.problem)

    def joint_w_zi(self, i: int) -> FiniteJoint:
        return joint_w_zi(self.problem, i)

    # -- loss differences ------------------------------------------------

    def column_gap(self) -> np.ndarray:
        """``gap[w, u] = l(w, z^-) - l(w, z^+)`` for column ``u = z^- * |Z| + z^+``."""
        L = self.problem.loss
        return (L[:, :, None] - L[:, None, :]).reshape(self.m, self.k * self.k)

    def table_gap(self, i: int) -> np.ndarray:
        """``gap[w, T] = l(w, z^-_i) - l(w, z^+_i)`` for every table."""
        L = self.problem.loss
        return L[:, self.zm[:, i]] - L[:, self.zp[:, i]]

    def f_ri_column(self, i: int) -> np.ndarray:
        """``R_i (l(W, Z_i^-) - l(W, Z_i^+))`` on the ``(W, R_i, Z_i)`` grid."""
        return np.array([-1.0, 1.0])[None, :, None] * self.column_gap()[:, None, :]

    def f_ri_table(self, i: int) -> np.ndarray:
        return np.array([-1.0, 1.0])[None, :, None] * self.table_gap(i)[:, None, :]

    def f_rvec_table(self) -> np.ndarray:
        """``(1/n) sum_i R_i (l(W, Z_i^-) - l(W, Z_i^+))`` on the ``(W, R, Z^+-)`` grid."""
        out = np.zeros((self.m, 2 ** self.n, self.n_tables))
        for i in range(self.n):
            out += self.r_sign[None, :, i, None] * self.table_gap(i)[:, None, :]
        return out / self.n

    def supersample_gen_error(self) -> float:
        """Exact ``E[(1/n) sum_i R_i (l(W, Z_i^-) - l(W, Z_i^+))]``."""
        f = self.f_rvec_table()
        return float(np.sum(self.joint_w_rvec_given_table().table * f))


def gen_error_supersample_identity(problem: FiniteProblem, budget: int = DEFAULT_BUDGET) -> Tuple[float, float]:
    """Generalization error computed two ways: from training vectors, and
    from the Rademacher-weighted supersample form."""
    world = SupersampleWorld(problem, budget)
    lhs = true_gen_error(problem).value
    rhs = world.supersample_gen_error()
    return lhs, rhs
