"""Gaussian mean estimation: ``Z_i ~ N(mu, sigma2)`` i.i.d., ``W = mean(Z)``,
squared loss.

Closed forms cover the IMI bound and the true error. The ICIMI bound and
the strengthened CMI/CIMI bounds are Monte Carlo averages over supersample
draws of exact per-draw inverse conjugates. Every computation works with
centered data (``mu`` subtracted); all quantities are translation invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import montecarlo
from .cgf_fenchel import (
    CgfCurve,
    CLOSED_FORM,
    inverse_fenchel,
    inverse_fenchel_batch,
    subgaussian_inverse_conjugate,
)
from .core_model import GaussianProblem
from .errors import DomainError, NumericError
from .info_measures import (
    DEFAULT_QUAD_TOL,
    LN2,
    log_cosh,
    mixed_gaussian_mi,
    mixed_gaussian_mi_alpha,
)
from .reports import (
    AVERAGED,
    BoundReport,
    CIMI_STRENGTHENED,
    CMI_STRENGTHENED,
    ICIMI,
    IMI,
    SAMPLE_CONDITIONED,
)

LOG2_E = 1.0 / LN2
PROP1_FLOOR_FACTOR = 1.0 / (math.pi * math.sqrt(LOG2_E))  # floor / sigma2, about 0.265
ICIMI_RATE = 2.0 / math.sqrt(math.pi)
MAX_DISTINCT_N = 20
# log-lambda bracket after 48 golden steps is ~1e-8 wide; value error is quadratic in it
PROP1_ITERATIONS = 48


@dataclass(frozen=True)
class GaussianCaseConfig:
    sigma2: float = 1.0
    n: int = 2
    mu: float = 0.0
    mc_samples: int = 100_000
    seed: int = 0
    quad_tol: float = DEFAULT_QUAD_TOL

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise DomainError("sigma2 must be positive")
        if int(self.n) < 1:
            raise DomainError("n must be a positive integer")
        if int(self.mc_samples) < 2:
            raise DomainError("mc_samples must be at least 2")
        if not self.quad_tol > 0:
            raise DomainError("quad_tol must be positive")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @classmethod
    def from_problem(cls, problem: GaussianProblem, **kw) -> "GaussianCaseConfig":
        return cls(sigma2=problem.sigma2, n=problem.n, mu=problem.mu, **kw)


@dataclass(frozen=True)
class ConditionalMixture:
    """Law of ``W`` given one supersample column: a fair mixture of two Gaussians."""

    means: Tuple[float, float]
    variance: float
    weights: Tuple[float, float] = (0.5, 0.5)


def conditional_mixture(z_minus: float, z_plus: float, n: int, sigma2: float) -> ConditionalMixture:
    if n < 2:
        raise DomainError("the column-conditioned mixture needs n >= 2")
    return ConditionalMixture((z_plus / n, z_minus / n), (n - 1) * sigma2 / n ** 2)


# ---------------------------------------------------------------------------
# IMI
# ---------------------------------------------------------------------------


def _loss_scale(n: int, sigma2: float) -> float:
    # l(W~, Z~) = s * chi^2_1 with s = sigma2 (n+1)/n
    return sigma2 * (n + 1) / n


def imi_gaussian(config: GaussianCaseConfig, envelope: str = "subgaussian") -> Tuple[float, float]:
    """``(I(W;Z_i), IMI bound)``.

    The ``"subgaussian"`` envelope bounds the CGF of ``-s chi^2_1`` by
    ``s^2 lam^2``; ``"exact"`` inverts ``lam s - ln(1 + 2 lam s)/2`` numerically.
    """
    n = config.n
    if n < 2:
        raise DomainError("IMI information term is infinite for n = 1")
    info = 0.5 * math.log(n / (n - 1))
    s = _loss_scale(n, config.sigma2)
    if envelope == "subgaussian":
        return info, subgaussian_inverse_conjugate(2.0 * s * s, info)
    if envelope == "exact":
        curve = CgfCurve(lambda lam: lam * s - 0.5 * np.log1p(2.0 * lam * s), CLOSED_FORM)
        return info, inverse_fenchel(curve, info).value
    raise DomainError(f"unknown envelope {envelope!r}")


def imi_closed_form(n, sigma2: float = 1.0):
    """``sigma2 sqrt(2 (n+1)^2/n^2 ln(n/(n-1)))``, vectorized over ``n``."""
    n = np.asarray(n, dtype=float)
    return sigma2 * np.sqrt(2.0 * (n + 1) ** 2 / n ** 2 * np.log(n / (n - 1)))


def imi_info_monte_carlo(config: GaussianCaseConfig) -> Tuple[float, float]:
    """Monte Carlo ``I(W;Z_i)`` as the mean log density ratio ``p(w|z)/p(w)``."""
    n, s2 = config.n, config.sigma2
    if n < 2:
        raise DomainError("n must be at least 2")
    v_cond = (n - 1) * s2 / n ** 2
    v_marg = s2 / n

    def run(rng, size):
        z = math.sqrt(s2) * rng.standard_normal(size)
        rest = math.sqrt((n - 1) * s2) * rng.standard_normal(size)
        w = (z + rest) / n
        return (
            -0.5 * math.log(v_cond) - (w - z / n) ** 2 / (2 * v_cond)
            + 0.5 * math.log(v_marg) + w ** 2 / (2 * v_marg)
        )

    draws = np.concatenate(montecarlo.run_chunked(run, config.mc_samples, config.seed))
    return montecarlo.batch_means(draws)


# ---------------------------------------------------------------------------
# ICIMI
# ---------------------------------------------------------------------------


def _alpha(z_minus, z_plus, n, sigma2):
    nu = np.abs(np.asarray(z_plus) - np.asarray(z_minus)) / (2.0 * n)
    return nu / math.sqrt((n - 1) * sigma2 / n ** 2)


def icimi_info_term(z_minus: float, z_plus: float, config: GaussianCaseConfig) -> float:
    """``I_{Z_i^+-}(W; R_i)`` at ``Z_i^+- = (z_minus, z_plus)``, in nats."""
    n = config.n
    if n < 2:
        raise DomainError("n must be at least 2")
    nu = (z_plus - z_minus) / (2.0 * n)
    return mixed_gaussian_mi(nu, (n - 1) * config.sigma2 / n ** 2, config.quad_tol)


def icimi_info_terms(z_minus, z_plus, config: GaussianCaseConfig) -> np.ndarray:
    if config.n < 2:
        raise DomainError("n must be at least 2")
    return mixed_gaussian_mi_alpha(_alpha(z_minus, z_plus, config.n, config.sigma2), config.quad_tol)


def _icimi_psi_parts(z_minus, z_plus, n, sigma2):
    zm = np.asarray(z_minus, dtype=float)
    zp = np.asarray(z_plus, dtype=float)
    a = zm ** 2 - zp ** 2
    b = 2.0 * (zp - zm)
    v = (n - 1) * sigma2 / n ** 2
    c1 = a + b * zp / n
    c2 = a + b * zm / n
    return c1, c2, 0.5 * b * b * v


def icimi_cgf_batch(z_minus, z_plus, n: int, sigma2: float):
    """Exact CGFs of ``G~_i`` given ``Z_i^+- = (z_minus, z_plus)``, batched.

    ``psi(lam) = lam^2 b^2 v / 2 + ln((cosh(lam c1) + cosh(lam c2)) / 2)`` with
    ``b = 2(z+ - z-)``, ``v = (n-1) sigma2 / n^2`` and
    ``c_k = z-^2 - z+^2 + b z_k / n``.
    """
    c1, c2, quad = _icimi_psi_parts(z_minus, z_plus, n, sigma2)
    c1, c2, quad = (np.ravel(x) for x in (c1, c2, quad))

    def psi(lam):
        return quad * lam * lam + np.logaddexp(log_cosh(lam * c1), log_cosh(lam * c2)) - LN2

    slope = np.where(quad > 0, np.inf, np.maximum(np.abs(c1), np.abs(c2)))
    return psi, slope


def icimi_cgf(z_minus: float, z_plus: float, n: int, sigma2: float) -> CgfCurve:
    c1, c2, quad = (float(x) for x in _icimi_psi_parts(z_minus, z_plus, n, sigma2))

    def fn(lam):
        return quad * lam * lam + np.logaddexp(log_cosh(lam * c1), log_cosh(lam * c2)) - LN2

    slope = None if quad > 0 else max(abs(c1), abs(c2))
    return CgfCurve(fn, CLOSED_FORM, slope_limit=slope)


def lemma_conjugate_bound(z_minus, z_plus, n: int, sigma2: float, eta):
    """Analytic upper bound ``B_{z+-,n}(eta)`` on the column-conditioned
    inverse conjugate of ``G~_i`` (vectorized)."""
    zm = np.asarray(z_minus, dtype=float)
    zp = np.asarray(z_plus, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0):
        raise DomainError("eta must be nonnegative")
    root = np.sqrt(2.0 * eta)
    tail = 4.0 * np.maximum(zp ** 2, zm ** 2) / n
    sq_gap = np.abs(zp ** 2 - zm ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        generic = sq_gap * root + 2.0 * sigma2 * (zp - zm) ** 2 / (n * sq_gap) * root + tail
    mirrored = 4.0 * math.sqrt(sigma2) * np.sqrt(2.0 * eta / n) * np.abs(zp) + tail
    out = np.where(sq_gap > 0, generic, np.where(zp == zm, tail, mirrored))
    return out if out.ndim else float(out)


def _icimi_chunk(config: GaussianCaseConfig):
    n, s2 = config.n, config.sigma2

    def run(rng, size):
        zm = config.mu + config.sigma * rng.standard_normal(size)
        zp = config.mu + config.sigma * rng.standard_normal(size)
        zm, zp = zm - config.mu, zp - config.mu
        eta = icimi_info_terms(zm, zp, config)
        psi, slope = icimi_cgf_batch(zm, zp, n, s2)
        exact = inverse_fenchel_batch(psi, eta, slope)
        lemma = lemma_conjugate_bound(zm, zp, n, s2, eta)
        leading = (zm - zp) ** 2 * np.abs(zm + zp) / (2.0 * config.sigma * math.sqrt(n - 1))
        return np.stack([np.minimum(exact, lemma), exact, lemma, leading, eta])

    return run


def icimi_gaussian(config: GaussianCaseConfig, variant: str = SAMPLE_CONDITIONED) -> BoundReport:
    """ICIMI bound by Monte Carlo over one supersample column.

    By symmetry every index ``i`` contributes the same expectation, so the
    bound is ``E[min(B(eta), Psi^{*-1}(eta))]`` with ``eta = I_{z+-}(W;R_i)``.
    The ``averaged`` variant inverts the Monte Carlo average of the column
    CGFs at the averaged information term.
    """
    n = config.n
    if n < 2:
        raise DomainError("the ICIMI Gaussian analysis needs n >= 2")
    asym = ICIMI_RATE * config.sigma2 / math.sqrt(n - 1)
    if variant == SAMPLE_CONDITIONED:
        parts = np.concatenate(montecarlo.run_chunked(_icimi_chunk(config), config.mc_samples, config.seed), axis=1)
        value, se = montecarlo.batch_means(parts[0])
        extras = {
            "exact_conjugate_mean": float(parts[1].mean()),
            "lemma_bound_mean": float(parts[2].mean()),
            "leading_term_mean": float(parts[3].mean()),
            "info_term_mean": float(parts[4].mean()),
            "asymptote": asym,
            "scaled_value": value * math.sqrt(n - 1) / config.sigma2,
        }
        return BoundReport(
            ICIMI, value, (float(parts[4].mean()),) * 1, CLOSED_FORM, "monte_carlo", se, n,
            SAMPLE_CONDITIONED, extras=extras,
        )
    if variant == AVERAGED:
        return _icimi_gaussian_averaged(config, asym)
    raise DomainError(f"unknown variant {variant!r}")


def _icimi_gaussian_averaged(config: GaussianCaseConfig, asym: float) -> BoundReport:
    n = config.n
    rng = montecarlo.substreams(config.seed, 1)[0]
    zm = config.sigma * rng.standard_normal(config.mc_samples)
    zp = config.sigma * rng.standard_normal(config.mc_samples)
    eta = icimi_info_terms(zm, zp, config)
    values = []
    for idx in np.array_split(np.arange(zm.size), montecarlo.N_BATCHES):
        psi, _ = icimi_cgf_batch(zm[idx], zp[idx], n, config.sigma2)
        curve = CgfCurve(lambda lam, psi=psi, m=idx.size: float(np.mean(psi(np.full(m, float(lam))))), "averaged")
        values.append(inverse_fenchel(curve, float(eta[idx].mean())).value)
    values = np.array(values)
    psi, _ = icimi_cgf_batch(zm, zp, n, config.sigma2)
    curve = CgfCurve(lambda lam: float(np.mean(psi(np.full(zm.size, float(lam))))), "averaged")
    value = inverse_fenchel(curve, float(eta.mean())).value
    se = float(values.std(ddof=1) / math.sqrt(values.size))
    return BoundReport(
        ICIMI, value, (float(eta.mean()),), "averaged", "monte_carlo", se, n, AVERAGED,
        extras={"asymptote": asym, "scaled_value": value * math.sqrt(n - 1) / config.sigma2},
    )


# ---------------------------------------------------------------------------
# CMI / CIMI: information constants and the constant-order floor
# ---------------------------------------------------------------------------


def subset_averages(table: np.ndarray) -> np.ndarray:
    """All ``2^n`` candidate learner outputs for a ``2 x n`` table, indexed by
    selector bits (bit ``i`` set means ``R_i = +1``), row-major."""
    n = table.shape[1]
    bits = np.indices((2,) * n).reshape(n, -1).T.astype(bool)
    return np.where(bits, table[1], table[0]).mean(axis=1)


def gaussian_info_constants(config: GaussianCaseConfig, n_tables: int = 200) -> Tuple[float, float]:
    """``(I(W;R_[n]|Z+-), I_{Z+-}(W;R_i))`` in nats, after certifying on
    sampled tables that ``R_[n]`` is recoverable from ``(W, Z+-)``."""
    n = config.n
    if n > MAX_DISTINCT_N:
        raise DomainError(f"distinctness check limited to n <= {MAX_DISTINCT_N}")
    rng = montecarlo.substreams(config.seed, 1)[0]
    for k in range(n_tables):
        table = config.mu + config.sigma * rng.standard_normal((2, n))
        avg = np.sort(subset_averages(table))
        gaps = np.diff(avg)
        if gaps.size and gaps.min() <= 0:
            raise NumericError("duplicate subset averages", {"table_index": k, "n": n})
    return n * LN2, LN2


def _delta_all(tables: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """``d[b, r', i] = (w_{r'} - z^-_i)^2 - (w_{r'} - z^+_i)^2`` for every
    table ``b`` and every candidate average ``w_{r'}``."""
    B, _, n = tables.shape
    bits = np.indices((2,) * n).reshape(n, -1).T.astype(bool)  # (2^n, n)
    sel = np.where(bits[None], tables[:, 1][:, None, :], tables[:, 0][:, None, :])
    w = sel.mean(axis=2)  # (B, 2^n)
    zm = tables[:, 0][:, None, :]
    zp = tables[:, 1][:, None, :]
    d = (w[:, :, None] - zm) ** 2 - (w[:, :, None] - zp) ** 2
    return d, w


def _mean_log_cosh(x: np.ndarray) -> np.ndarray:
    """``ln mean_{r'} exp(sum_i ln cosh(x[..., r', i]))`` over axis -2."""
    s = log_cosh(x).sum(axis=-1)
    m = s.max(axis=-1, keepdims=True)
    return m[..., 0] + np.log(np.mean(np.exp(s - m), axis=-1))


def _prop1_chunk(config: GaussianCaseConfig):
    n = config.n

    def run(rng, size):
        tables = config.sigma * rng.standard_normal((size, 2, n))
        if n == 1:
            # psi(lam) = ln cosh(D lam) with D = (z- - z+)^2
            D = (tables[:, 0, 0] - tables[:, 1, 0]) ** 2
            val = inverse_fenchel_batch(lambda lam: log_cosh(lam * D), np.full(size, LN2), D)
            return np.stack([val, val])
        d, _ = _delta_all(tables)  # (B, 2^n, n)
        # strengthened CMI: E~ = (1/n) sum_i R~_i d_i(W~)
        slope_cmi = np.abs(d).sum(axis=2).max(axis=1) / n

        def psi_cmi(lam):
            return _mean_log_cosh(lam[:, None, None] * d / n)

        cmi = inverse_fenchel_batch(psi_cmi, np.full(size, n * LN2), slope_cmi, PROP1_ITERATIONS)
        # strengthened CIMI: E~_i = R~_i d_i(W~), one curve per (table, i)
        di = d.transpose(0, 2, 1).reshape(size * n, -1)  # (B n, 2^n)
        slope_cimi = np.abs(di).max(axis=1)

        def psi_cimi(lam):
            return _mean_log_cosh(lam[:, None, None] * di[:, :, None])

        cimi = inverse_fenchel_batch(psi_cimi, np.full(size * n, LN2), slope_cimi, PROP1_ITERATIONS)
        return np.stack([cmi, cimi.reshape(size, n).mean(axis=1)])

    return run


@dataclass(frozen=True)
class Prop1Result:
    cmi_s: float
    cimi_s: float
    floor: float
    cmi_se: float
    cimi_se: float
    n: int

    def holds(self, k: float = 3.0) -> bool:
        return self.cmi_s >= self.floor - k * self.cmi_se and self.cimi_s >= self.floor - k * self.cimi_se


def prop1_lower_check(config: GaussianCaseConfig, chunk: int = 256) -> Prop1Result:
    """Monte Carlo strengthened CMI and CIMI bounds against the
    ``sigma2 / (pi sqrt(log2 e))`` floor.

    Each draw is a full ``2 x n`` table; ``W~`` ranges over the ``2^n``
    subset averages, so the conditional CGFs are exact. The information
    terms are ``n ln 2`` and ``ln 2`` (``R_[n]`` is recoverable a.s.).
    """
    n = config.n
    if n > MAX_DISTINCT_N:
        raise DomainError(f"exact table CGFs limited to n <= {MAX_DISTINCT_N}")
    parts = np.concatenate(montecarlo.run_chunked(_prop1_chunk(config), config.mc_samples, config.seed, chunk), axis=1)
    cmi, cmi_se = montecarlo.batch_means(parts[0])
    cimi, cimi_se = montecarlo.batch_means(parts[1])
    return Prop1Result(cmi, cimi, PROP1_FLOOR_FACTOR * config.sigma2, cmi_se, cimi_se, n)


def strengthened_gaussian(config: GaussianCaseConfig, which: str) -> BoundReport:
    res = prop1_lower_check(config)
    if which == CMI_STRENGTHENED:
        return BoundReport(CMI_STRENGTHENED, res.cmi_s, (config.n * LN2,), "exact_finite", "monte_carlo",
                           res.cmi_se, config.n, SAMPLE_CONDITIONED, extras={"floor": res.floor})
    return BoundReport(CIMI_STRENGTHENED, res.cimi_s, (LN2,) * config.n, "exact_finite", "monte_carlo",
                       res.cimi_se, config.n, SAMPLE_CONDITIONED, extras={"floor": res.floor})


def imi_report(config: GaussianCaseConfig, envelope: str = "subgaussian") -> BoundReport:
    info, bound = imi_gaussian(config, envelope)
    kind = "closed_form_subgaussian" if envelope == "subgaussian" else CLOSED_FORM
    return BoundReport(IMI, bound, (info,) * config.n, kind, "exact", 0.0, config.n, envelope,
                       extras={"scaled_value": bound * math.sqrt(config.n - 1) / config.sigma2})
