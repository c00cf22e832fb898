"""Cumulant generating functions and the inverse Fenchel conjugate

    psi*^{-1}(eta) = inf_{lam > 0} (eta + psi(lam)) / lam.

The objective ``g(lam) = (eta + psi(lam))/lam`` is decreasing while
``lam psi'(lam) - psi(lam) < eta`` and nondecreasing afterwards, so it is
unimodal in ``log lam`` and golden-section search applies once a bracket is
found.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, NumericError
from .info_measures import FiniteJoint, log_cosh

LAM_MIN = 1e-12
LAM_MAX = 1e12
DEFAULT_TOL = 1e-10
ESS_FLOOR = 30.0

EXACT_FINITE = "exact_finite"
EMPIRICAL = "empirical"
SUBGAUSSIAN = "closed_form_subgaussian"
LNCOSH = "closed_form_lncosh"
AVERAGED = "averaged"
CLOSED_FORM = "closed_form"

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CgfCurve:
    """An evaluable centered CGF ``lam -> psi(lam)``.

    ``slope_limit`` is ``lim psi(lam)/lam`` as ``lam -> inf`` when known
    (the largest upward deviation for bounded variables). ``lam_max`` marks
    where an empirical curve stops being trustworthy.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    kind: str
    domain: Tuple[float, float] = (-math.inf, math.inf)
    slope_limit: Optional[float] = None
    lam_max: Optional[float] = None

    def __call__(self, lam):
        lam_arr = np.asarray(lam, dtype=float)
        out = np.asarray(self.fn(lam_arr), dtype=float)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class ConjugateResult:
    value: float
    argmin: float
    iterations: int
    bracket: Tuple[float, float]
    limit: Optional[str] = None  # "zero" or "infinity" when the infimum is a limit
    warning: Optional[str] = None


# ---------------------------------------------------------------------------
# CGF evaluation
# ---------------------------------------------------------------------------


def _log_mgf_centered(values: np.ndarray, probs: np.ndarray, lam: np.ndarray) -> np.ndarray:
    keep = probs > 0
    v = values[keep]
    p = probs[keep]
    centered = v - float(np.dot(p, v))
    x = np.multiply.outer(lam, centered)
    m = x.max(axis=-1, keepdims=True)
    out = m[..., 0] + np.log(np.sum(p * np.exp(x - m), axis=-1))
    return out


def cgf_exact(values, probs, lam):
    """``ln E[exp(lam (F - E F))]`` for ``F`` taking ``values`` w.p. ``probs``."""
    v = np.asarray(values, dtype=float).ravel()
    p = np.asarray(getattr(probs, "probabilities", probs), dtype=float).ravel()
    if v.shape != p.shape:
        raise DomainError("values and probabilities differ in length")
    out = _log_mgf_centered(v, p, np.asarray(lam, dtype=float))
    return out if np.ndim(out) else float(out)


def cgf_empirical(samples, lam):
    """Plug-in CGF of a sample, centered at the sample mean."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise DomainError("empirical CGF needs at least two samples")
    p = np.full(x.size, 1.0 / x.size)
    out = _log_mgf_centered(x, p, np.asarray(lam, dtype=float))
    return out if np.ndim(out) else float(out)


def sample_conditioned_cgf(joint: FiniteJoint, f, u: int, lam):
    """CGF of ``F = f(X, Y)`` under ``P(x, y | U = u)``, centered at ``E[F | u]``."""
    t = joint.as_conditional()
    if not 0 <= u < t.shape[2] or t[:, :, u].sum() <= 0:
        raise DomainError(f"P(U={u}) = 0")
    fv = np.broadcast_to(np.asarray(f, dtype=float).reshape(_f_shape(f, t)), t.shape)
    return cgf_exact(fv[:, :, u].ravel(), joint.slice_u(u).ravel(), lam)


def _f_shape(f, t):
    f = np.asarray(f)
    return f.shape if f.ndim == 3 else f.shape + (1,)


# ---------------------------------------------------------------------------
# curve constructors
# ---------------------------------------------------------------------------


def finite_curve(values, probs) -> CgfCurve:
    v = np.asarray(values, dtype=float).ravel()
    p = np.asarray(getattr(probs, "probabilities", probs), dtype=float).ravel()
    if v.shape != p.shape:
        raise DomainError("values and probabilities differ in length")
    keep = p > 0
    mean = float(np.dot(p[keep], v[keep]))
    slope = float(np.max(v[keep] - mean))
    return CgfCurve(lambda lam: _log_mgf_centered(v, p, lam), EXACT_FINITE, slope_limit=max(slope, 0.0))


def conditional_curve(joint: FiniteJoint, f, u: int) -> CgfCurve:
    t = joint.as_conditional()
    fv = np.broadcast_to(np.asarray(f, dtype=float).reshape(_f_shape(f, t)), t.shape)
    return finite_curve(fv[:, :, u].ravel(), joint.slice_u(u).ravel())


def _ess(centered: np.ndarray, lam: float) -> float:
    x = lam * centered
    w = np.exp(x - x.max())
    return float(w.sum() ** 2 / np.sum(w * w))


def empirical_curve(samples) -> CgfCurve:
    """Empirical CGF with its effective-sample-size trust limit."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise DomainError("empirical CGF needs at least two samples")
    p = np.full(x.size, 1.0 / x.size)
    centered = x - x.mean()
    if _ess(centered, LAM_MAX) >= ESS_FLOOR:
        lam_max = math.inf
    elif _ess(centered, LAM_MIN) < ESS_FLOOR:
        lam_max = 0.0
    else:
        lo, hi = math.log(LAM_MIN), math.log(LAM_MAX)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if _ess(centered, math.exp(mid)) >= ESS_FLOOR:
                lo = mid
            else:
                hi = mid
        lam_max = math.exp(lo)
    slope = float(centered.max())
    return CgfCurve(lambda lam: _log_mgf_centered(x, p, lam), EMPIRICAL, slope_limit=slope, lam_max=lam_max)


def subgaussian_curve(sigma2: float) -> CgfCurve:
    if not sigma2 >= 0:
        raise DomainError("sigma2 must be nonnegative")
    return CgfCurve(lambda lam: 0.5 * sigma2 * lam * lam, SUBGAUSSIAN, slope_limit=None if sigma2 > 0 else 0.0)


def lncosh_curve(scale: float) -> CgfCurve:
    c = abs(float(scale))
    return CgfCurve(lambda lam: log_cosh(c * lam), LNCOSH, slope_limit=c)


def average_curve(curves: Sequence[CgfCurve], weights) -> CgfCurve:
    """``sum_u w_u psi_u`` -- the conditional CGF averaged over ``U``."""
    w = np.asarray(weights, dtype=float)
    if len(curves) != w.size:
        raise DomainError("one weight per curve required")
    w = w / w.sum()
    slopes = [c.slope_limit for c in curves]
    slope = None if any(s is None for s in slopes) else float(np.dot(w, slopes))

    def fn(lam):
        return sum(wi * np.asarray(c.fn(lam)) for wi, c in zip(w, curves))

    return CgfCurve(fn, AVERAGED, slope_limit=slope)


# ---------------------------------------------------------------------------
# inverse Fenchel conjugate
# ---------------------------------------------------------------------------


def _objective(cgf: CgfCurve, eta: float):
    def g(t):
        lam = math.exp(t)
        val = (eta + float(cgf.fn(np.asarray(lam)))) / lam
        return val if math.isfinite(val) else math.inf

    return g


def inverse_fenchel(cgf: CgfCurve, eta: float, tol: float = DEFAULT_TOL) -> ConjugateResult:
    """``inf_{lam > 0} (eta + psi(lam)) / lam`` by bracketed golden section on ``log lam``.

    The bracket grows geometrically from ``lam = 1`` until the objective
    turns upward on both sides. If it keeps decreasing up to ``LAM_MAX`` the
    infimum is the limit ``lim psi(lam)/lam`` and ``limit="infinity"``.
    """
    if eta < 0 or math.isnan(eta):
        raise DomainError(f"eta must be nonnegative, got {eta!r}")
    if eta == 0:
        return ConjugateResult(0.0, 0.0, 0, (0.0, 0.0), limit="zero")
    if math.isinf(eta):
        return ConjugateResult(math.inf, math.inf, 0, (0.0, math.inf), limit="infinity")

    g = _objective(cgf, eta)
    t_lo = math.log(LAM_MIN)
    t_hi = math.log(LAM_MAX)
    if math.isfinite(cgf.domain[1]):
        t_hi = min(t_hi, math.log(cgf.domain[1]) - 1e-9)
    evals = 0

    t_mid = min(0.0, t_hi)
    g_mid = g(t_mid)
    step = 1.0
    t_nb = t_mid + step
    g_nb = g(t_nb) if t_nb <= t_hi else math.inf
    evals += 2
    direction = 1.0 if g_nb < g_mid else -1.0
    if direction > 0:
        t_a = t_mid
        t_mid, g_mid = t_nb, g_nb
    else:
        t_a = t_nb

    # walk downhill until the objective turns up
    while True:
        step *= 2.0
        t_next = t_mid + direction * step
        clipped = False
        if direction > 0 and t_next >= t_hi:
            t_next, clipped = t_hi, True
        if direction < 0 and t_next <= t_lo:
            t_next, clipped = t_lo, True
        g_next = g(t_next)
        evals += 1
        if g_next >= g_mid:
            break
        if clipped:
            if direction > 0:
                best = g_next
                if cgf.slope_limit is not None:
                    best = min(best, cgf.slope_limit)
                return ConjugateResult(
                    float(max(best, 0.0)), math.inf, evals, (math.exp(t_mid), math.inf),
                    limit="infinity", warning=_trust_warning(cgf, math.inf),
                )
            raise NumericError(
                "inverse conjugate objective still decreasing at the smallest lambda",
                {"eta": eta, "lam": math.exp(t_next), "g": g_next, "kind": cgf.kind},
            )
        t_a = t_mid
        t_mid, g_mid = t_next, g_next
        if step > 1e6:
            raise NumericError("failed to bracket the inverse conjugate", {"eta": eta, "kind": cgf.kind})

    a, b = sorted((t_a, t_next))
    xtol = max(1e-13, 0.1 * math.sqrt(tol))
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    gc, gd = g(c), g(d)
    evals += 2
    best_t, best_g = (t_mid, g_mid)
    while b - a > xtol:
        if gc < gd:
            b, d, gd = d, c, gc
            c = b - _INVPHI * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + _INVPHI * (b - a)
            gd = g(d)
        evals += 1
    for t_, g_ in ((c, gc), (d, gd)):
        if g_ <= best_g:
            best_t, best_g = t_, g_
    value = best_g
    limit = None
    argmin = math.exp(best_t)
    if cgf.slope_limit is not None and cgf.slope_limit <= value:
        # floating-point plateau at the asymptote
        value, limit, argmin = cgf.slope_limit, "infinity", math.inf
    return ConjugateResult(
        float(max(value, 0.0)), argmin, evals, (math.exp(a), math.exp(b)),
        limit=limit, warning=_trust_warning(cgf, argmin),
    )


def _trust_warning(cgf: CgfCurve, argmin: float) -> Optional[str]:
    if cgf.lam_max is not None and argmin > cgf.lam_max:
        return f"argmin {argmin:.3g} beyond empirical trust limit {cgf.lam_max:.3g}"
    return None


def inverse_fenchel_batch(psi, eta, slope_limit=None, iterations: int = 80):
    """Vectorized inverse conjugate for a family of curves.

    ``psi(lam)`` maps an array of shape ``(B,)`` to the ``B`` curve values,
    curve ``b`` evaluated at ``lam[b]``. Golden section runs on the fixed
    window ``log lam in [log LAM_MIN, log LAM_MAX]``; unimodality makes the
    window search exact up to the final width (about ``1e-15`` after 80
    steps).
    """
    eta = np.asarray(eta, dtype=float).ravel()
    if np.any(eta < 0) or np.any(np.isnan(eta)):
        raise DomainError("eta must be nonnegative")
    B = eta.size

    def g(t):
        lam = np.exp(t)
        with np.errstate(over="ignore", invalid="ignore"):
            val = (eta + np.asarray(psi(lam), dtype=float)) / lam
        return np.where(np.isfinite(val), val, np.inf)

    a = np.full(B, math.log(LAM_MIN))
    b = np.full(B, math.log(LAM_MAX))
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(iterations):
        left = gc < gd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = np.where(left, b - _INVPHI * (b - a), d)
        new_d = np.where(left, c, a + _INVPHI * (b - a))
        probe = np.where(left, new_c, new_d)
        gp = g(probe)
        gc_next = np.where(left, gp, gd)
        gd_next = np.where(left, gc, gp)
        c, d, gc, gd = new_c, new_d, gc_next, gd_next
    g_end = g(np.full(B, math.log(LAM_MAX)))
    value = np.minimum(np.minimum(gc, gd), g_end)
    if slope_limit is not None:
        value = np.minimum(value, np.asarray(slope_limit, dtype=float))
    value = np.where(eta == 0, 0.0, value)
    value = np.where(np.isinf(eta), np.inf, value)
    return np.maximum(value, 0.0)


def finite_family(values: np.ndarray, probs: np.ndarray):
    """Batch evaluator for ``B`` finite-support CGFs.

    ``values`` and ``probs`` have shape ``(B, K)``; returns ``(psi, slope)``
    suitable for :func:`inverse_fenchel_batch`.
    """
    v = np.asarray(values, dtype=float)
    p = np.asarray(probs, dtype=float)
    mean = np.sum(p * v, axis=1, keepdims=True)
    centered = v - mean
    logp = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), -np.inf)
    slope = np.max(np.where(p > 0, centered, -np.inf), axis=1)

    def psi(lam):
        x = lam[:, None] * centered + logp
        m = x.max(axis=1, keepdims=True)
        return m[:, 0] + np.log(np.sum(np.exp(x - m), axis=1))

    return psi, np.maximum(slope, 0.0)


def subgaussian_inverse_conjugate(sigma2: float, eta: float) -> float:
    """``sqrt(2 sigma2 eta)``: the inverse conjugate of ``sigma2 lam^2 / 2``."""
    if eta < 0:
        raise DomainError("eta must be nonnegative")
    return math.sqrt(2.0 * sigma2 * eta)


def lncosh_lower(x):
    """``min(1, |x|/2) |x|/2``, a lower bound on ``ln cosh(x)``."""
    a = np.abs(np.asarray(x, dtype=float))
    out = np.minimum(1.0, a / 2.0) * a / 2.0
    return out if out.ndim else float(out)
