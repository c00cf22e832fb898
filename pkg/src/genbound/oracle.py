"""Brute-force enumeration oracle.

Everything here is recomputed from an explicit list of weighted states with
plain Python loops and dictionaries, independently of the array code in
:mod:`genbound.bounds`. Inverse conjugates use a log-spaced grid followed by
scipy's bounded Brent search. The oracle is slow by design and only meant for
tiny problems.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .core_model import DEFAULT_BUDGET, FiniteProblem
from .errors import DomainError, ResourceError
from .info_measures import MI_FLOOR, FiniteJoint
from .reports import (
    AVERAGED,
    BoundReport,
    CIMI,
    CIMI_STRENGTHENED,
    CMI,
    CMI_STRENGTHENED,
    ICIMI,
    ICIMI_BOUNDED,
    IMI,
    MI,
    SAMPLE_CONDITIONED,
)

ORACLE_TOL = 1e-11
ASSERT_TOL = 1e-9
_LOG_LAM = (math.log(1e-12), math.log(1e12))
_GRID = np.linspace(*_LOG_LAM, 4001)


# ---------------------------------------------------------------------------
# enumerated world
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class State:
    zm: Tuple[int, ...]
    zp: Tuple[int, ...]
    r: Tuple[int, ...]
    w: int
    prob: float

    def train(self) -> Tuple[int, ...]:
        return tuple(p if s > 0 else m for m, p, s in zip(self.zm, self.zp, self.r))


@dataclass(frozen=True)
class EnumeratedWorld:
    problem: FiniteProblem
    states: Tuple[State, ...]
    budget: int

    def total_probability(self) -> float:
        return math.fsum(s.prob for s in self.states)

    def marginal(self, key: Callable[[State], Hashable]) -> Dict[Hashable, float]:
        out: Dict[Hashable, float] = defaultdict(float)
        for s in self.states:
            out[key(s)] += s.prob
        return dict(out)


def enumerate_world(problem: FiniteProblem, n: Optional[int] = None, budget: int = DEFAULT_BUDGET) -> EnumeratedWorld:
    """Every ``(Z^-, Z^+, R, W)`` with its exact probability."""
    n = problem.n if n is None else n
    if n != problem.n:
        raise DomainError(f"problem has n={problem.n}, asked for n={n}")
    k, m = problem.kz, problem.kw
    count = k ** (2 * n) * 2 ** n * m
    if count > budget:
        raise ResourceError(f"world has {count} states, budget is {budget}")
    xi = [float(p) for p in problem.xi.probabilities]
    states = []
    for zm in itertools.product(range(k), repeat=n):
        for zp in itertools.product(range(k), repeat=n):
            p_table = math.prod(xi[z] for z in zm + zp)
            for r in itertools.product((-1, 1), repeat=n):
                train = tuple(b if s > 0 else a for a, b, s in zip(zm, zp, r))
                row = problem.train_index(train)
                for w in range(m):
                    states.append(State(zm, zp, r, w, p_table * float(problem.kernel[row, w]) / 2 ** n))
    return EnumeratedWorld(problem, tuple(states), budget)


# ---------------------------------------------------------------------------
# dictionary information measures and conjugates
# ---------------------------------------------------------------------------


def _group(world: EnumeratedWorld, x, y, u) -> Dict[Tuple, float]:
    out: Dict[Tuple, float] = defaultdict(float)
    for s in world.states:
        out[(x(s), y(s), u(s))] += s.prob
    return dict(out)


def _slices(joint: Dict[Tuple, float]):
    """Per ``u``: ``(P(u), {(x, y): P(x, y | u)})``."""
    by_u: Dict[Hashable, Dict[Tuple, float]] = defaultdict(dict)
    for (x, y, u), p in joint.items():
        if p > 0:
            by_u[u][(x, y)] = p
    out = {}
    for u, cells in by_u.items():
        pu = math.fsum(cells.values())
        out[u] = (pu, {k: v / pu for k, v in cells.items()})
    return out


def _cell_mi(cells: Dict[Tuple, float]) -> float:
    px: Dict = defaultdict(float)
    py: Dict = defaultdict(float)
    for (x, y), p in cells.items():
        px[x] += p
        py[y] += p
    val = math.fsum(p * math.log(p / (px[x] * py[y])) for (x, y), p in cells.items())
    return val if val >= MI_FLOOR else 0.0


def _decoupled_values(cells, f, u):
    px: Dict = defaultdict(float)
    py: Dict = defaultdict(float)
    for (x, y), p in cells.items():
        px[x] += p
        py[y] += p
    vals, probs = [], []
    for x, a in px.items():
        for y, b in py.items():
            vals.append(f(x, y, u))
            probs.append(a * b)
    return np.array(vals), np.array(probs)


def oracle_inverse_conjugate(values, probs, eta: float) -> float:
    """``inf_{lam>0} (eta + psi(lam))/lam`` for a finite law: grid, then Brent."""
    if eta == 0:
        return 0.0
    v = np.asarray(values, dtype=float)
    p = np.asarray(probs, dtype=float)
    keep = p > 0
    v, p = v[keep], p[keep]
    c = v - np.dot(p, v)
    logp = np.log(p)
    slope = max(float(c.max()), 0.0)

    def g(t):
        lam = math.exp(t)
        return (eta + float(logsumexp(lam * c + logp))) / lam

    lam = np.exp(_GRID)
    grid = (eta + logsumexp(lam[:, None] * c + logp, axis=1)) / lam
    j = int(np.argmin(grid))
    best = float(grid[j])
    lo, hi = _GRID[max(j - 1, 0)], _GRID[min(j + 1, _GRID.size - 1)]
    if hi > lo:
        res = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        best = min(best, float(res.fun))
    return max(0.0, min(best, slope))


def _terms(joint: Dict[Tuple, float], f) -> Tuple[float, float, float]:
    """``(E_U[Psi*^-1_u(I_u)], psibar*^-1(I), I)`` for ``F = f(x, y, u)``."""
    sl = _slices(joint)
    strong, info = 0.0, 0.0
    curves = []
    for u, (pu, cells) in sl.items():
        iu = _cell_mi(cells)
        v, q = _decoupled_values(cells, f, u)
        strong += pu * oracle_inverse_conjugate(v, q, iu)
        info += pu * iu
        curves.append((pu, v, q))
    weak = _averaged_inverse(curves, info)
    return strong, weak, info


def _averaged_inverse(curves, eta: float) -> float:
    if eta == 0:
        return 0.0
    prepared = []
    slope = 0.0
    for pu, v, q in curves:
        keep = q > 0
        c = v[keep] - np.dot(q[keep], v[keep])
        prepared.append((pu, c, np.log(q[keep])))
        slope += pu * max(float(c.max()), 0.0)

    def g(t):
        lam = math.exp(t)
        return (eta + sum(pu * float(logsumexp(lam * c + lq)) for pu, c, lq in prepared)) / lam

    lam = np.exp(_GRID)
    psi = sum(pu * logsumexp(lam[:, None] * c + lq, axis=1) for pu, c, lq in prepared)
    grid = (eta + psi) / lam
    j = int(np.argmin(grid))
    best = float(grid[j])
    lo, hi = _GRID[max(j - 1, 0)], _GRID[min(j + 1, _GRID.size - 1)]
    res = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return max(0.0, min(best, float(res.fun), slope))


def _mi_only(joint: Dict[Tuple, float]) -> float:
    return math.fsum(pu * _cell_mi(cells) for pu, cells in _slices(joint).values())


def _per_u_mi(joint: Dict[Tuple, float]):
    return [(pu, _cell_mi(cells)) for pu, cells in _slices(joint).values()]


# ---------------------------------------------------------------------------
# CD lemma check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CdCheck:
    """Both chains ``lhs <= mid <= rhs`` for ``+F~`` (index 0) and ``-F~`` (index 1)."""

    lhs: Tuple[float, float]
    mid: Tuple[float, float]
    rhs: Tuple[float, float]

    def excess(self) -> float:
        """Largest violation of either chain (negative when both hold)."""
        return max(max(l - m, m - r) for l, m, r in zip(self.lhs, self.mid, self.rhs))

    def holds(self, tol: float = ASSERT_TOL) -> bool:
        return self.excess() <= tol


def cd_lemma_check(joint: FiniteJoint, f) -> CdCheck:
    """Evaluate the conditional decoupling chain on an explicit joint.

    ``f`` is an array over ``X x Y`` or ``X x Y x U``.
    """
    if not isinstance(joint, FiniteJoint):
        joint = FiniteJoint(joint)
    t = joint.as_conditional()
    fa = np.asarray(f, dtype=float)
    if fa.ndim == 2:
        fa = np.repeat(fa[:, :, None], t.shape[2], axis=2)
    if fa.shape != t.shape:
        raise DomainError(f"f has shape {fa.shape}, joint has {t.shape}")
    d = {(x, y, u): float(t[x, y, u]) for x, y, u in itertools.product(*map(range, t.shape))}
    lhs, mid, rhs = [], [], []
    for sign in (1.0, -1.0):
        fn = lambda x, y, u, s=sign: s * fa[x, y, u]  # noqa: E731
        e_f = math.fsum(p * fn(*k) for k, p in d.items())
        e_dec = 0.0
        for u, (pu, cells) in _slices(d).items():
            v, q = _decoupled_values(cells, fn, u)
            e_dec += pu * float(np.dot(v, q))
        strong, weak, _ = _terms(d, fn)
        lhs.append(e_f - e_dec)
        mid.append(strong)
        rhs.append(weak)
    return CdCheck(tuple(lhs), tuple(mid), tuple(rhs))


def random_cd_instance(rng: np.random.Generator, max_alphabet: int = 4):
    """Flat-Dirichlet joint over ``X x Y x U`` and ``f`` uniform on ``[-1, 1]``."""
    if max_alphabet < 2:
        raise DomainError("max_alphabet must be at least 2")
    kx = int(rng.integers(2, max_alphabet + 1))
    ky = int(rng.integers(2, max_alphabet + 1))
    ku = int(rng.integers(1, max_alphabet + 1))
    table = rng.dirichlet(np.ones(kx * ky * ku)).reshape(kx, ky, ku)
    f = rng.uniform(-1.0, 1.0, size=(kx, ky))
    return FiniteJoint(table), f


@dataclass
class CdSweep:
    trials: int
    seed: int
    max_excess: float = -math.inf
    violations: List[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def cd_check_sweep(trials: int, max_alphabet: int = 4, seed: int = 0, tol: float = ASSERT_TOL,
                   dump_dir: Optional[str] = None) -> CdSweep:
    """Random CD lemma instances; each failing one is recorded (and dumped
    as a JSON reproducer when ``dump_dir`` is given)."""
    if trials < 0:
        raise DomainError("trials must be nonnegative")
    out = CdSweep(trials, seed)
    for k, child in enumerate(np.random.SeedSequence(seed).spawn(trials)):
        rng = np.random.default_rng(child)
        joint, f = random_cd_instance(rng, max_alphabet)
        check = cd_lemma_check(joint, f)
        out.max_excess = max(out.max_excess, check.excess())
        if not check.holds(tol):
            rec = {
                "trial": k, "seed": seed, "spawn_key": list(child.spawn_key),
                "table": joint.table.tolist(), "f": f.tolist(),
                "lhs": check.lhs, "mid": check.mid, "rhs": check.rhs,
            }
            out.violations.append(rec)
            if dump_dir:
                os.makedirs(dump_dir, exist_ok=True)
                with open(os.path.join(dump_dir, f"cd_violation_{k}.json"), "w") as fh:
                    json.dump(rec, fh, indent=2)
    return out


# ---------------------------------------------------------------------------
# independent bound recomputation
# ---------------------------------------------------------------------------


def oracle_gen_error(world: EnumeratedWorld) -> float:
    """``E[L_xi(W)] - E[L_train(W)]`` straight from the states."""
    L = world.problem.loss
    xi = world.problem.xi.probabilities
    pop = [float(np.dot(L[w], xi)) for w in range(world.problem.kw)]
    n = world.problem.n
    return math.fsum(
        s.prob * (pop[s.w] - sum(L[s.w, z] for z in s.train()) / n) for s in world.states
    )


def brute_force_bounds(problem: FiniteProblem, n: Optional[int] = None, budget: int = DEFAULT_BUDGET) -> List[BoundReport]:
    world = enumerate_world(problem, n, budget)
    L = problem.loss
    n = problem.n
    lo, hi = float(L.min()), float(L.max())
    unit = lo >= -1e-12 and hi <= 1 + 1e-12
    one = lambda s: 0  # noqa: E731
    reports: List[BoundReport] = []

    # MI with the Hoeffding certificate
    support = [z for z in range(problem.kz) if problem.xi.probabilities[z] > 0]
    s2 = max((max(L[w, z] for z in support) - min(L[w, z] for z in support)) ** 2 / 4 for w in range(problem.kw))
    i_full = _mi_only(_group(world, lambda s: s.w, lambda s: s.train(), one))
    reports.append(BoundReport(MI, math.sqrt(2 * s2 * i_full / n), (i_full,)))

    # IMI, exact and sub-Gaussian envelopes
    ex, sg, infos = [], [], []
    for i in range(n):
        j = _group(world, lambda s: s.w, lambda s, i=i: s.train()[i], one)
        strong, _, info = _terms(j, lambda x, y, u: -L[x, y])
        ex.append(strong)
        sg.append(math.sqrt(2 * s2 * info))
        infos.append(info)
    reports.append(BoundReport(IMI, sum(ex) / n, tuple(infos), variant="exact"))
    reports.append(BoundReport(IMI, sum(sg) / n, tuple(infos), variant="subgaussian"))

    # CMI with Delta read off the table
    delta = [[max(abs(L[w, a] - L[w, b]) for w in range(problem.kw)) for b in range(problem.kz)] for a in range(problem.kz)]
    xi = problem.xi.probabilities
    ed2 = math.fsum(xi[a] * xi[b] * delta[a][b] ** 2 for a in range(problem.kz) for b in range(problem.kz))
    table = lambda s: (s.zm, s.zp)  # noqa: E731
    j_full = _group(world, lambda s: s.w, lambda s: s.r, table)
    i_cmi = _mi_only(j_full)
    reports.append(BoundReport(CMI, math.sqrt(2 / n * ed2 * i_cmi), (i_cmi,)))

    def gap(x, u, i):
        zm, zp = u
        return L[x, zm[i]] - L[x, zp[i]]

    # per-i joints conditioned on the table and on the column
    tab = [_group(world, lambda s: s.w, lambda s, i=i: s.r[i], table) for i in range(n)]
    col = [_group(world, lambda s: s.w, lambda s, i=i: s.r[i], lambda s, i=i: (s.zm[i], s.zp[i])) for i in range(n)]

    if unit:
        for variant in (SAMPLE_CONDITIONED, AVERAGED):
            vals = []
            for j in tab:
                per = _per_u_mi(j)
                info = math.fsum(p * v for p, v in per)
                vals.append(math.fsum(p * math.sqrt(2 * v) for p, v in per) if variant == SAMPLE_CONDITIONED
                            else math.sqrt(2 * info))
            reports.append(BoundReport(CIMI, sum(vals) / n, variant=variant))

    icimi = [_terms(j, lambda x, y, u: y * (L[x, u[0]] - L[x, u[1]])) for j in col]
    reports.append(BoundReport(ICIMI, sum(t[0] for t in icimi) / n, variant=SAMPLE_CONDITIONED))
    reports.append(BoundReport(ICIMI, sum(t[1] for t in icimi) / n, variant=AVERAGED))

    per_col = [_per_u_mi(j) for j in col]
    line1 = (hi - lo) / n * sum(math.fsum(p * math.sqrt(2 * v) for p, v in per) for per in per_col)
    line2 = (hi - lo) / n * sum(math.sqrt(2 * math.fsum(p * v for p, v in per)) for per in per_col)
    reports.append(BoundReport(ICIMI_BOUNDED, line1, variant=SAMPLE_CONDITIONED, extras={"averaged": line2}))

    e_full = lambda x, y, u: sum(y[i] * gap(x, u, i) for i in range(n)) / n  # noqa: E731
    strong, _, _ = _terms(j_full, e_full)
    reports.append(BoundReport(CMI_STRENGTHENED, strong, variant=SAMPLE_CONDITIONED))
    cimi_s = [_terms(tab[i], lambda x, y, u, i=i: y * gap(x, u, i)) for i in range(n)]
    reports.append(BoundReport(CIMI_STRENGTHENED, sum(t[0] for t in cimi_s) / n, variant=SAMPLE_CONDITIONED))
    reports.append(BoundReport(CIMI_STRENGTHENED, sum(t[1] for t in cimi_s) / n, variant=AVERAGED))
    return reports


def compare_with_engine(problem: FiniteProblem, engine_reports: Sequence[BoundReport],
                        oracle_reports: Optional[Sequence[BoundReport]] = None) -> Dict[Tuple[str, str], float]:
    """Absolute discrepancy per ``(bound_name, variant)`` key present in both lists."""
    oracle_reports = oracle_reports if oracle_reports is not None else brute_force_bounds(problem)
    eng = {r.key(): r for r in engine_reports}
    out = {}
    for r in oracle_reports:
        if r.key() in eng:
            e = eng[r.key()]
            out[r.key()] = abs(e.value - r.value)
            if "averaged" in r.extras and "averaged" in e.extras:
                out[(r.bound_name, "extras.averaged")] = abs(e.extras["averaged"] - r.extras["averaged"])
    return out
