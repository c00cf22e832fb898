"""Exact information measures over finite joints (nats throughout), plus the
mutual information between a Rademacher label and a symmetric two-component
Gaussian mixture."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericError

LN2 = math.log(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
DEFAULT_QUAD_TOL = 1e-10
# KL sums of independent tables land within a few ulps of 0; anything below
# this is round-off and is reported as exactly 0
MI_FLOOR = 1e-14


def log_cosh(x):
    """``ln cosh(x)`` without overflow: ``|x| + ln((1 + e^{-2|x|})/2)``."""
    a = np.abs(np.asarray(x, dtype=float))
    out = a + np.log1p(np.exp(-2.0 * a)) - LN2
    return out if out.ndim else float(out)


def _sum_tol(size: int) -> float:
    return 1e-12 + 1e-15 * size


@dataclass(frozen=True)
class FiniteJoint:
    """Probability table over ``(X, Y)`` or ``(X, Y, U)``, axes in that order."""

    table: np.ndarray
    labels: Tuple[str, ...] = ("X", "Y", "U")

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim not in (2, 3):
            raise DomainError(f"joint must have 2 or 3 axes, got {t.ndim}")
        if np.any(~np.isfinite(t)) or np.any(t < 0):
            raise DomainError("joint entries must be finite and nonnegative")
        if abs(t.sum() - 1.0) > _sum_tol(t.size):
            raise DomainError(f"joint sums to {t.sum()!r}, not 1")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "labels", tuple(self.labels[: t.ndim]))

    @property
    def shape(self):
        return self.table.shape

    @property
    def conditioned(self) -> bool:
        return self.table.ndim == 3

    def as_conditional(self) -> np.ndarray:
        """The table with a trailing singleton ``U`` axis if none exists."""
        return self.table if self.conditioned else self.table[:, :, None]

    def marginal(self, keep: Sequence[int]) -> np.ndarray:
        drop = tuple(a for a in range(self.table.ndim) if a not in keep)
        return self.table.sum(axis=drop)

    def p_u(self) -> np.ndarray:
        return self.as_conditional().sum(axis=(0, 1))

    def slice_u(self, u: int) -> np.ndarray:
        """Conditional table ``P(x, y | U = u)``."""
        t = self.as_conditional()
        pu = t[:, :, u].sum()
        if pu <= 0:
            raise DomainError(f"P(U={u}) = 0")
        return t[:, :, u] / pu


@dataclass(frozen=True)
class SampleConditionedMI:
    """``I_u(X;Y)`` for every ``u`` with ``P(u) > 0`` and their mean."""

    per_u: List[Tuple[int, float, float]]
    mean: float

    def values(self) -> np.ndarray:
        return np.array([v for _, v, _ in self.per_u])

    def weights(self) -> np.ndarray:
        return np.array([p for _, _, p in self.per_u])

    def support(self) -> np.ndarray:
        return np.array([u for u, _, _ in self.per_u], dtype=int)


def _plogp_ratio(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Elementwise ``p ln(p/q)`` with ``0 ln 0 = 0`` and ``+inf`` where ``q=0<p``."""
    out = np.zeros(np.broadcast(p, q).shape)
    pos = p > 0
    p_b, q_b = np.broadcast_arrays(p, q)
    bad = pos & (q_b <= 0)
    ok = pos & ~bad
    out[ok] = p_b[ok] * (np.log(p_b[ok]) - np.log(q_b[ok]))
    out[bad] = np.inf
    return out


def kl_divergence(p, q) -> float:
    """``D(p || q)`` in nats; ``+inf`` when ``p`` is not dominated by ``q``."""
    pa = np.asarray(getattr(p, "probabilities", getattr(p, "table", p)), dtype=float)
    qa = np.asarray(getattr(q, "probabilities", getattr(q, "table", q)), dtype=float)
    if pa.shape != qa.shape:
        raise DomainError(f"alphabet mismatch: {pa.shape} vs {qa.shape}")
    val = float(np.sum(_plogp_ratio(pa, qa)))
    return max(val, 0.0)


def _per_u_mi(t3: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """``(P(u), I_u)`` arrays for a 3-axis table; ``I_u`` is 0 where ``P(u)=0``."""
    pu = t3.sum(axis=(0, 1))
    pxu = t3.sum(axis=1, keepdims=True)
    pyu = t3.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        prod = pxu * pyu / np.where(pu > 0, pu, 1.0)
    contrib = _plogp_ratio(t3, prod).sum(axis=(0, 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        iu = np.where(pu > 0, contrib / np.where(pu > 0, pu, 1.0), 0.0)
    return pu, np.where(iu < MI_FLOOR, 0.0, iu)


def mutual_information(joint: FiniteJoint) -> float:
    """``I(X;Y)`` of a 2-axis joint."""
    if not isinstance(joint, FiniteJoint):
        joint = FiniteJoint(joint)
    if joint.conditioned:
        raise DomainError("mutual_information expects a 2-axis joint; use conditional_mutual_information")
    _, iu = _per_u_mi(joint.table[:, :, None])
    return float(iu[0])


def conditional_mutual_information(joint: FiniteJoint) -> float:
    """``I(X;Y|U) = sum_u P(u) I_u(X;Y)``."""
    if not isinstance(joint, FiniteJoint):
        joint = FiniteJoint(joint)
    pu, iu = _per_u_mi(joint.as_conditional())
    return float(np.dot(pu, iu))


def sample_conditioned_mi(joint: FiniteJoint) -> SampleConditionedMI:
    if not isinstance(joint, FiniteJoint):
        joint = FiniteJoint(joint)
    pu, iu = _per_u_mi(joint.as_conditional())
    per = [(int(u), float(iu[u]), float(pu[u])) for u in np.flatnonzero(pu > 0)]
    mean = float(np.dot(pu, iu))
    return SampleConditionedMI(per, mean)


def dv_gap(joint, decoupled, f, lam: float) -> float:
    """Donsker-Varadhan objective ``E_P[lam F] - ln E_Q[exp(lam F)]``.

    ``f`` holds the value of ``F`` on every cell of the tables. The result
    never exceeds ``KL(P || Q)``.
    """
    p = np.asarray(getattr(joint, "table", joint), dtype=float)
    q = np.asarray(getattr(decoupled, "table", decoupled), dtype=float)
    if p.shape != q.shape:
        raise DomainError("joint and decoupled tables differ in shape")
    fv = np.broadcast_to(np.asarray(f, dtype=float), p.shape)
    if lam == 0:
        return 0.0
    x = lam * fv[q > 0]
    m = x.max()
    log_mgf = m + math.log(float(np.sum(q[q > 0] * np.exp(x - m))))
    return float(lam * np.sum(p * fv) - log_mgf)


# ---------------------------------------------------------------------------
# mixed-Gaussian mutual information
# ---------------------------------------------------------------------------


def _tail_cutoff(alpha: float, tol: float) -> float:
    # integrand <= e^{-(t-alpha)^2/2} * alpha * t beyond the peak
    scale = 10.0 * (alpha + 1.3 * alpha * alpha) / tol
    c = math.sqrt(2.0 * math.log(scale)) if scale > math.e else 1.0
    return alpha + max(c, 1.0)


def _integrand(t, alpha):
    bump = 0.5 * (np.exp(-0.5 * (t - alpha) ** 2) + np.exp(-0.5 * (t + alpha) ** 2))
    return bump * log_cosh(alpha * t)


def _finish(alpha, integral):
    val = alpha * alpha - (2.0 / _SQRT_2PI) * integral
    return np.clip(val, 0.0, LN2)


def mixed_gaussian_mi(nu: float, sigma2: float, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """``I(V;R)`` for ``V | R=+-1 ~ N(+-nu, sigma2)`` and fair ``R``, in nats.

    Uses ``I(V;R) = alpha^2 - J(alpha)`` with ``alpha = |nu|/sigma`` and
    ``J(alpha) = (2/sqrt(2 pi)) e^{-alpha^2/2} int_0^inf e^{-t^2/2}
    cosh(alpha t) ln cosh(alpha t) dt``, integrated adaptively on ``[0, T]``.
    """
    if not sigma2 > 0:
        raise DomainError("sigma2 must be positive")
    alpha = abs(float(nu)) / math.sqrt(sigma2)
    if alpha == 0.0:
        return 0.0
    upper = _tail_cutoff(alpha, quad_tol)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, abserr, info = integrate.quad(
            _integrand, 0.0, upper, args=(alpha,), epsabs=quad_tol, epsrel=0.0,
            limit=500, points=[alpha] if alpha < upper else None, full_output=True,
        )[:3]
    if abserr > 10 * quad_tol or not math.isfinite(value):
        raise NumericError(
            "mixed-Gaussian quadrature did not converge",
            {"alpha": alpha, "abserr": abserr, "upper": upper, "neval": info.get("neval")},
        )
    return float(_finish(alpha, value))


def mixed_gaussian_mi_alpha(alpha, quad_tol: float = DEFAULT_QUAD_TOL) -> np.ndarray:
    """Vectorized ``I(V;R)`` as a function of ``alpha = |nu|/sigma``.

    All entries share one adaptive subdivision of ``[0, T]`` driven by the
    worst entry.
    """
    a = np.abs(np.asarray(alpha, dtype=float))
    flat = a.ravel()
    out = np.zeros_like(flat)
    live = flat > 0
    if not np.any(live):
        return out.reshape(a.shape)
    al = flat[live]
    upper = _tail_cutoff(float(al.max()), quad_tol)
    res = integrate.quad_vec(
        lambda t: _integrand(t, al), 0.0, upper, epsabs=quad_tol, epsrel=0.0,
        norm="max", limit=2000, full_output=True,
    )
    value, abserr, info = res
    if info.status != 0 or abserr > 10 * quad_tol:
        raise NumericError(
            "vectorized mixed-Gaussian quadrature did not converge",
            {"status": info.status, "abserr": abserr, "upper": upper, "size": al.size},
        )
    out[live] = _finish(al, value)
    return out.reshape(a.shape)
