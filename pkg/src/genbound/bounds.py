"""Generalization bounds for finite and Gaussian learning problems.

Every finite-problem bound goes through :func:`decoupling_conjugates`: pick
a joint over ``(X, Y, U)`` and a function ``F(x, y, u)``, and it returns
both the sample-conditioned (strong) and the averaged (weak) inverse
conjugates of ``F~`` under the decoupled law. The bounds differ only in
which joint and which ``F`` they feed in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .cgf_fenchel import (
    EXACT_FINITE,
    SUBGAUSSIAN,
    finite_family,
    inverse_fenchel_batch,
    subgaussian_inverse_conjugate,
)
from .core_model import (
    DEFAULT_BUDGET,
    FiniteProblem,
    GaussianProblem,
    LearningProblem,
    true_gen_error,
)
from .errors import DomainError
from .gaussian_case import (
    GaussianCaseConfig,
    icimi_gaussian,
    imi_report,
    strengthened_gaussian,
)
from .info_measures import FiniteJoint, _per_u_mi, mutual_information
from .reports import (
    AVERAGED,
    BoundComparison,
    BoundReport,
    CIMI,
    CIMI_STRENGTHENED,
    CMI,
    CMI_STRENGTHENED,
    ICIMI,
    ICIMI_BOUNDED,
    IMI,
    INAPPLICABLE,
    MI,
    SAMPLE_CONDITIONED,
)
from .supersample import SupersampleWorld, joint_w_train, joint_w_zi


@dataclass(frozen=True)
class DecouplingTerms:
    """Inverse conjugates for one ``(joint, F)`` pair.

    ``strong = E_U[Psi*^-1_{F~|U}(I_U)]`` and
    ``weak = psibar*^-1(I(X;Y|U))``; ``strong <= weak`` by concavity.
    ``gap`` is ``E[F] - E[F~]``, the quantity both bound.
    """

    strong: float
    weak: float
    info: float
    gap: float
    per_u: np.ndarray  # columns: u, P(u), I_u, conjugate


def decoupling_conjugates(joint: FiniteJoint, f, sign: float = 1.0) -> DecouplingTerms:
    """Both sides of the conditional decoupling inequality for ``sign * F``."""
    t = joint.as_conditional()
    fv = sign * np.broadcast_to(np.asarray(f, dtype=float).reshape(_shape3(f, t)), t.shape)
    pu, iu = _per_u_mi(t)
    live = np.flatnonzero(pu > 0)
    pxu = t.sum(axis=1, keepdims=True)
    pyu = t.sum(axis=0, keepdims=True)
    dec = pxu * pyu / np.where(pu > 0, pu, 1.0)
    gap = float(np.sum(t * fv) - np.sum(dec * fv))
    # one finite CGF per live u, over the X*Y grid under P(x|u)P(y|u)
    vals = fv[:, :, live].reshape(-1, live.size).T
    probs = (dec[:, :, live] / pu[live]).reshape(-1, live.size).T
    psi, slope = finite_family(vals, probs)
    eta = iu[live]
    conj = inverse_fenchel_batch(psi, eta, slope)
    w = pu[live]
    strong = float(np.dot(w, conj))
    info = float(np.dot(w, eta))

    def psi_bar(lam):
        return np.array([np.dot(w, psi(np.full(live.size, lam[0])))])

    weak = float(inverse_fenchel_batch(psi_bar, [info], [float(np.dot(w, slope))])[0])
    per_u = np.column_stack([live, w, eta, conj])
    return DecouplingTerms(strong, weak, info, gap, per_u)


def _shape3(f, t):
    f = np.asarray(f)
    return f.shape if f.ndim == 3 else f.shape + (1,)


def _require_finite(problem, what: str) -> FiniteProblem:
    if not isinstance(problem, FiniteProblem):
        raise DomainError(f"{what} needs a finite problem")
    return problem


def _check_range(problem: FiniteProblem, a: float, b: float, what: str):
    lo, hi = problem.loss_range()
    if lo < a - 1e-12 or hi > b + 1e-12:
        raise DomainError(
            f"{what}: loss range [{lo}, {hi}] is outside [{a}, {b}]; "
            "use the strengthened variant for general losses"
        )


def _gaussian_config(problem: GaussianProblem, mc: Optional[dict]) -> GaussianCaseConfig:
    return GaussianCaseConfig.from_problem(problem, **(mc or {}))


# ---------------------------------------------------------------------------
# MI and IMI
# ---------------------------------------------------------------------------


def mi_bound(problem: LearningProblem, sigma2_loss: Optional[float] = None, budget: int = DEFAULT_BUDGET) -> BoundReport:
    """``sqrt(2 sigma2 I(W;Z_[n]) / n)`` for a ``sigma2``-sub-Gaussian loss.

    Without ``sigma2_loss`` the Hoeffding certificate of the loss table is used.
    """
    if isinstance(problem, GaussianProblem):
        return BoundReport(MI, math.inf, (math.inf,), SUBGAUSSIAN, n=problem.n, flags=("infinite_mi",))
    problem = _require_finite(problem, "mi_bound")
    problem.check_budget(problem.kz ** problem.n * problem.kw, budget)
    s2 = problem.subgaussian_variance() if sigma2_loss is None else float(sigma2_loss)
    if s2 < 0:
        raise DomainError("sigma2_loss must be nonnegative")
    info = mutual_information(joint_w_train(problem))
    value = subgaussian_inverse_conjugate(s2 / problem.n, info)
    return BoundReport(MI, value, (info,), SUBGAUSSIAN, n=problem.n, extras={"sigma2_loss": s2})


def imi_bound(problem: LearningProblem, envelope: Optional[str] = None, mc: Optional[dict] = None,
              budget: int = DEFAULT_BUDGET) -> BoundReport:
    """``(1/n) sum_i psi_-*^-1(I(W;Z_i))``.

    ``envelope="exact"`` uses the CGF of ``-l(W~, Z~_i)`` itself;
    ``"subgaussian"`` uses the Hoeffding envelope of the loss table. For the
    Gaussian problem the closed forms apply. The default is ``"exact"`` for
    finite problems and ``"subgaussian"`` for the Gaussian one.
    """
    if isinstance(problem, GaussianProblem):
        return imi_report(_gaussian_config(problem, mc), envelope or "subgaussian")
    envelope = envelope or "exact"
    problem = _require_finite(problem, "imi_bound")
    problem.check_budget(problem.kz ** problem.n * problem.kw, budget)
    infos, vals = [], []
    for i in range(problem.n):
        joint = joint_w_zi(problem, i)
        if envelope == "exact":
            terms = decoupling_conjugates(joint, -problem.loss)
            infos.append(terms.info)
            vals.append(terms.strong)
        elif envelope == "subgaussian":
            info = mutual_information(joint)
            infos.append(info)
            vals.append(subgaussian_inverse_conjugate(problem.subgaussian_variance(), info))
        else:
            raise DomainError(f"unknown envelope {envelope!r}")
    kind = EXACT_FINITE if envelope == "exact" else SUBGAUSSIAN
    return BoundReport(IMI, float(np.mean(vals)), tuple(infos), kind, n=problem.n, variant=envelope,
                       extras={"psi_minus": envelope})


# ---------------------------------------------------------------------------
# CMI and CIMI
# ---------------------------------------------------------------------------


def expected_delta_squared(problem: FiniteProblem) -> float:
    """``E[Delta(Z1, Z2)^2]`` with ``Delta(z1, z2) = max_w |l(w, z1) - l(w, z2)|``."""
    L = problem.loss
    delta = np.abs(L[:, :, None] - L[:, None, :]).max(axis=0)
    p = problem.xi.probabilities
    return float(p @ (delta ** 2) @ p)


def cmi_bound(problem: LearningProblem, delta: Optional[float] = None, world: Optional[SupersampleWorld] = None,
              budget: int = DEFAULT_BUDGET) -> BoundReport:
    """``sqrt((2/n) E[Delta^2] I(W;R_[n]|Z+-_[n]))``.

    ``delta`` may fix ``Delta`` to a constant (e.g. ``b - a``); otherwise the
    tightest ``Delta`` is read off the loss table.
    """
    if isinstance(problem, GaussianProblem):
        return BoundReport(CMI, math.nan, (), n=problem.n, status=INAPPLICABLE, flags=("delta_unbounded",))
    problem = _require_finite(problem, "cmi_bound")
    world = world or SupersampleWorld(problem, budget)
    d2 = expected_delta_squared(problem) if delta is None else float(delta) ** 2
    pu, iu = _per_u_mi(world.joint_w_rvec_given_table().table)
    info = float(np.dot(pu, iu))
    value = math.sqrt(2.0 / problem.n * d2 * info)
    flags = ("delta_constant",) if delta is not None else ()
    return BoundReport(CMI, value, (info,), SUBGAUSSIAN, n=problem.n, flags=flags,
                       extras={"expected_delta_sq": d2})


def _per_i_cond_mi(world: SupersampleWorld, column: bool) -> List[Tuple[np.ndarray, np.ndarray]]:
    out = []
    for i in range(world.n):
        j = world.joint_w_ri_given_column(i) if column else world.joint_w_ri_given_table(i)
        out.append(_per_u_mi(j.table))
    return out


def cimi_bound(problem: LearningProblem, variant: str = SAMPLE_CONDITIONED,
               world: Optional[SupersampleWorld] = None, budget: int = DEFAULT_BUDGET) -> BoundReport:
    """CIMI bound for losses in ``[0, 1]``: ``(1/n) sum_i E[sqrt(2 I_{Z+-}(W;R_i))]``
    (sample-conditioned) or ``(1/n) sum_i sqrt(2 I(W;R_i|Z+-))`` (averaged)."""
    if isinstance(problem, GaussianProblem):
        raise DomainError("CIMI needs a loss in [0, 1]; use strengthened_cimi")
    problem = _require_finite(problem, "cimi_bound")
    _check_range(problem, 0.0, 1.0, "cimi_bound")
    world = world or SupersampleWorld(problem, budget)
    return _sqrt_family(CIMI, _per_i_cond_mi(world, column=False), variant, 1.0, problem.n)


def _sqrt_family(name, per_i, variant, scale, n, flags=()):
    infos, vals = [], []
    for pu, iu in per_i:
        info = float(np.dot(pu, iu))
        infos.append(info)
        if variant == SAMPLE_CONDITIONED:
            vals.append(float(np.dot(pu, np.sqrt(2.0 * iu))))
        elif variant == AVERAGED:
            vals.append(math.sqrt(2.0 * info))
        else:
            raise DomainError(f"unknown variant {variant!r}")
    return BoundReport(name, scale * float(np.mean(vals)), tuple(infos), SUBGAUSSIAN, n=n, variant=variant,
                       flags=tuple(flags))


# ---------------------------------------------------------------------------
# ICIMI
# ---------------------------------------------------------------------------


def _icimi_terms(world: SupersampleWorld) -> List[DecouplingTerms]:
    return [decoupling_conjugates(world.joint_w_ri_given_column(i), world.f_ri_column(i)) for i in range(world.n)]


def icimi_bound(problem: LearningProblem, variant: str = SAMPLE_CONDITIONED, world: Optional[SupersampleWorld] = None,
                mc: Optional[dict] = None, budget: int = DEFAULT_BUDGET) -> BoundReport:
    """ICIMI bound with the exact conditional CGFs of ``G~_i``.

    Sample-conditioned: ``(1/n) sum_i E[Psi*^-1_{G~_i|Z_i+-}(I_{Z_i+-}(W;R_i))]``.
    Averaged: ``(1/n) sum_i psibar*^-1(I(W;R_i|Z_i+-))``.
    """
    if isinstance(problem, GaussianProblem):
        return icimi_gaussian(_gaussian_config(problem, mc), variant)
    problem = _require_finite(problem, "icimi_bound")
    if variant not in (SAMPLE_CONDITIONED, AVERAGED):
        raise DomainError(f"unknown variant {variant!r}")
    world = world or SupersampleWorld(problem, budget)
    terms = _icimi_terms(world)
    vals = [t.strong if variant == SAMPLE_CONDITIONED else t.weak for t in terms]
    return BoundReport(ICIMI, float(np.mean(vals)), tuple(t.info for t in terms), EXACT_FINITE,
                       n=problem.n, variant=variant)


def icimi_bounded_loss(problem: LearningProblem, a: float, b: float, world: Optional[SupersampleWorld] = None,
                       budget: int = DEFAULT_BUDGET) -> BoundReport:
    """Bounded-loss ICIMI: ``((b-a)/n) sum_i E[sqrt(2 I_{Z_i+-}(W;R_i))]``.

    ``extras["averaged"]`` holds the looser ``((b-a)/n) sum_i sqrt(2 I(W;R_i|Z_i+-))``.
    """
    if isinstance(problem, GaussianProblem):
        raise DomainError("Gaussian squared loss is unbounded")
    problem = _require_finite(problem, "icimi_bounded_loss")
    if b < a:
        raise DomainError("need a <= b")
    _check_range(problem, a, b, "icimi_bounded_loss")
    world = world or SupersampleWorld(problem, budget)
    per_i = _per_i_cond_mi(world, column=True)
    strong = _sqrt_family(ICIMI_BOUNDED, per_i, SAMPLE_CONDITIONED, b - a, problem.n)
    weak = _sqrt_family(ICIMI_BOUNDED, per_i, AVERAGED, b - a, problem.n)
    return BoundReport(ICIMI_BOUNDED, strong.value, strong.info_terms, SUBGAUSSIAN, n=problem.n,
                       variant=SAMPLE_CONDITIONED, extras={"averaged": weak.value, "a": a, "b": b})


# ---------------------------------------------------------------------------
# strengthened CMI / CIMI
# ---------------------------------------------------------------------------


def strengthened_cmi(problem: LearningProblem, world: Optional[SupersampleWorld] = None, mc: Optional[dict] = None,
                     budget: int = DEFAULT_BUDGET) -> BoundReport:
    """``E[Psi*^-1_{E~|Z+-}(I_{Z+-}(W;R_[n]))]`` with the exact CGFs of ``E~``."""
    if isinstance(problem, GaussianProblem):
        return strengthened_gaussian(_gaussian_config(problem, mc), CMI_STRENGTHENED)
    problem = _require_finite(problem, "strengthened_cmi")
    world = world or SupersampleWorld(problem, budget)
    t = decoupling_conjugates(world.joint_w_rvec_given_table(), world.f_rvec_table())
    return BoundReport(CMI_STRENGTHENED, t.strong, (t.info,), EXACT_FINITE, n=problem.n,
                       variant=SAMPLE_CONDITIONED, extras={"averaged": t.weak})


def strengthened_cimi(problem: LearningProblem, variant: str = SAMPLE_CONDITIONED,
                      world: Optional[SupersampleWorld] = None, mc: Optional[dict] = None,
                      budget: int = DEFAULT_BUDGET) -> BoundReport:
    """``(1/n) sum_i E[Psi*^-1_{E~_i|Z+-}(I_{Z+-}(W;R_i))]`` with exact CGFs."""
    if isinstance(problem, GaussianProblem):
        return strengthened_gaussian(_gaussian_config(problem, mc), CIMI_STRENGTHENED)
    problem = _require_finite(problem, "strengthened_cimi")
    if variant not in (SAMPLE_CONDITIONED, AVERAGED):
        raise DomainError(f"unknown variant {variant!r}")
    world = world or SupersampleWorld(problem, budget)
    terms = [decoupling_conjugates(world.joint_w_ri_given_table(i), world.f_ri_table(i)) for i in range(world.n)]
    vals = [t.strong if variant == SAMPLE_CONDITIONED else t.weak for t in terms]
    return BoundReport(CIMI_STRENGTHENED, float(np.mean(vals)), tuple(t.info for t in terms), EXACT_FINITE,
                       n=problem.n, variant=variant)


# ---------------------------------------------------------------------------
# all bounds, comparisons, the dichotomy table
# ---------------------------------------------------------------------------


def _unit_interval(problem: FiniteProblem) -> bool:
    lo, hi = problem.loss_range()
    return lo >= -1e-12 and hi <= 1.0 + 1e-12


def all_bounds(problem: LearningProblem, mc: Optional[dict] = None, budget: int = DEFAULT_BUDGET) -> List[BoundReport]:
    """Every applicable bound for the problem, in a fixed order."""
    if isinstance(problem, GaussianProblem):
        reports = [mi_bound(problem), imi_bound(problem, mc=mc), cmi_bound(problem)]
        reports += [icimi_bound(problem, SAMPLE_CONDITIONED, mc=mc)]
        return reports
    world = SupersampleWorld(problem, budget)
    out = [
        mi_bound(problem, budget=budget),
        imi_bound(problem, "exact", budget=budget),
        imi_bound(problem, "subgaussian", budget=budget),
        cmi_bound(problem, world=world),
    ]
    lo, hi = problem.loss_range()
    if _unit_interval(problem):
        out += [cimi_bound(problem, v, world=world) for v in (SAMPLE_CONDITIONED, AVERAGED)]
    out += [icimi_bound(problem, v, world=world) for v in (SAMPLE_CONDITIONED, AVERAGED)]
    out.append(icimi_bounded_loss(problem, lo, hi, world=world))
    out.append(strengthened_cmi(problem, world=world))
    out += [strengthened_cimi(problem, v, world=world) for v in (SAMPLE_CONDITIONED, AVERAGED)]
    return out


@dataclass(frozen=True)
class InfoOrdering:
    """Per-index information terms behind the ordering lemmas (nats)."""

    column: Tuple[float, ...]  # I(W;R_i|Z_i+-)
    table: Tuple[float, ...]  # I(W;R_i|Z+-_[n])
    individual: Tuple[float, ...]  # I(W;Z_i)


def info_ordering(problem: FiniteProblem, world: Optional[SupersampleWorld] = None,
                  budget: int = DEFAULT_BUDGET) -> InfoOrdering:
    world = world or SupersampleWorld(problem, budget)
    col = tuple(float(np.dot(*p)) for p in _per_i_cond_mi(world, column=True))
    tab = tuple(float(np.dot(*p)) for p in _per_i_cond_mi(world, column=False))
    ind = tuple(mutual_information(joint_w_zi(problem, i)) for i in range(problem.n))
    return InfoOrdering(col, tab, ind)


def compare_bounds(problem: LearningProblem, tol: float = 1e-12, budget: int = DEFAULT_BUDGET) -> BoundComparison:
    """Ordering checks among information terms (always) and bound values
    (only for losses in ``[0, 1]``, where the conjugates coincide)."""
    problem = _require_finite(problem, "compare_bounds")
    world = SupersampleWorld(problem, budget)
    order = info_ordering(problem, world)
    pairs = []
    for i in range(problem.n):
        pairs.append((f"I(W;R_{i}|Z_{i})", f"I(W;R_{i}|Z)", order.column[i], order.table[i], "<="))
        pairs.append((f"I(W;R_{i}|Z_{i})", f"I(W;Z_{i})", order.column[i], order.individual[i], "<="))
    ic_s = icimi_bound(problem, SAMPLE_CONDITIONED, world=world).value
    ic_a = icimi_bound(problem, AVERAGED, world=world).value
    pairs.append(("ICIMI/sample_conditioned", "ICIMI/averaged", ic_s, ic_a, "<="))
    if _unit_interval(problem):
        cor = icimi_bounded_loss(problem, 0.0, 1.0, world=world)
        ci_s = cimi_bound(problem, SAMPLE_CONDITIONED, world=world).value
        ci_a = cimi_bound(problem, AVERAGED, world=world).value
        cmi1 = cmi_bound(problem, delta=1.0, world=world).value
        pairs += [
            ("ICIMI/sample_conditioned", "ICIMI_bounded/sample_conditioned", ic_s, cor.value, "<="),
            ("ICIMI_bounded/sample_conditioned", "ICIMI_bounded/averaged", cor.value, cor.extras["averaged"], "<="),
            ("ICIMI_bounded/averaged", "CIMI/averaged", cor.extras["averaged"], ci_a, "<="),
            ("CIMI/sample_conditioned", "CIMI/averaged", ci_s, ci_a, "<="),
            ("CIMI/averaged", "CMI/delta=1", ci_a, cmi1, "<="),
        ]
    return BoundComparison(pairs, tol)


@dataclass(frozen=True)
class DichotomyRow:
    approach: str
    x: str
    y: str
    u: str
    info_term: float
    value: float
    special_case: float


@dataclass(frozen=True)
class DichotomyTable:
    rows: Tuple[DichotomyRow, ...]
    notes: Tuple[str, ...] = ()

    def format(self) -> str:
        head = f"{'approach':<8} {'X':<3} {'Y':<6} {'U':<8} {'info(nats)':>12} {'bound':>12} {'l in [0,1]':>12}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(
                f"{r.approach:<8} {r.x:<3} {r.y:<6} {r.u:<8} {r.info_term:>12.6g} {r.value:>12.6g} {r.special_case:>12.6g}"
            )
        return "\n".join(lines + list(self.notes))


def table1_report(problem: LearningProblem, budget: int = DEFAULT_BUDGET) -> DichotomyTable:
    """One row per approach: ``(X, Y, U)``, information term, the exact-CGF
    bound and the ``[0, 1]``-loss special case (``nan`` if the loss is not
    in ``[0, 1]``)."""
    problem = _require_finite(problem, "table1_report")
    world = SupersampleWorld(problem, budget)
    unit = _unit_interval(problem)
    n = problem.n
    nan = math.nan

    mi = mi_bound(problem, budget=budget)
    mi_exact = decoupling_conjugates(joint_w_train(problem), -_mean_loss_over_train(problem))
    imi = imi_bound(problem, "exact", budget=budget)
    cmi_s = strengthened_cmi(problem, world=world)
    cimi_a = strengthened_cimi(problem, AVERAGED, world=world)
    icimi_a = icimi_bound(problem, AVERAGED, world=world)
    rows = (
        DichotomyRow(MI, "W", "Z_[n]", "-", mi.info_term, mi_exact.weak,
                     math.sqrt(mi.info_term / (2 * n)) if unit else nan),
        DichotomyRow(IMI, "W", "Z_i", "-", imi.info_term, imi.value,
                     float(np.mean([math.sqrt(v / 2) for v in imi.info_terms])) if unit else nan),
        DichotomyRow(CMI, "W", "R_[n]", "Z+-_[n]", cmi_s.info_term, cmi_s.extras["averaged"],
                     cmi_bound(problem, delta=1.0, world=world).value if unit else nan),
        DichotomyRow(CIMI, "W", "R_i", "Z+-_[n]", cimi_a.info_term, cimi_a.value,
                     cimi_bound(problem, AVERAGED, world=world).value if unit else nan),
        DichotomyRow(ICIMI, "W", "R_i", "Z+-_i", icimi_a.info_term, icimi_a.value,
                     icimi_bounded_loss(problem, 0.0, 1.0, world=world).extras["averaged"] if unit else nan),
    )
    notes = ("CMI special case uses sqrt((2/n) E[Delta^2] I) with Delta = 1",)
    return DichotomyTable(rows, notes)


def _mean_loss_over_train(problem: FiniteProblem) -> np.ndarray:
    """``(1/n) sum_i l(w, z_i)`` on the ``(W, Z_[n])`` grid."""
    zs = problem.train_vectors()
    return problem.loss[:, zs].mean(axis=2)


def gen_error(problem: LearningProblem) -> float:
    if isinstance(problem, GaussianProblem):
        return true_gen_error(problem, "closed_form").value
    return true_gen_error(problem).value
