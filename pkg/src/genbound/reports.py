"""Result records shared by the bounds engine, the Gaussian case study and the CLI."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

MI = "MI"
IMI = "IMI"
CMI = "CMI"
CIMI = "CIMI"
ICIMI = "ICIMI"
CMI_STRENGTHENED = "CMI_strengthened"
CIMI_STRENGTHENED = "CIMI_strengthened"
ICIMI_BOUNDED = "ICIMI_bounded"
BOUND_NAMES = (MI, IMI, CMI, CIMI, ICIMI, CMI_STRENGTHENED, CIMI_STRENGTHENED, ICIMI_BOUNDED)

SAMPLE_CONDITIONED = "sample_conditioned"
AVERAGED = "averaged"

OK = "ok"
INAPPLICABLE = "inapplicable"

# which formula produced each bound row (written to run manifests)
PROVENANCE = {
    MI: "sqrt(2 sigma^2 I(W;Z_[n]) / n), sub-Gaussian loss",
    IMI: "(1/n) sum_i psi_-^{*-1}(I(W;Z_i))",
    CMI: "sqrt((2/n) E[Delta(Z1,Z2)^2] I(W;R_[n]|Z+-_[n]))",
    CIMI: "(1/n) sum_i E[sqrt(2 I_{Z+-_[n]}(W;R_i))] | (1/n) sum_i sqrt(2 I(W;R_i|Z+-_[n])), loss in [0,1]",
    ICIMI: "(1/n) sum_i E[Psi^{*-1}_{G~_i|Z_i+-}(I_{Z_i+-}(W;R_i))] | (1/n) sum_i psibar^{*-1}(I(W;R_i|Z_i+-))",
    CMI_STRENGTHENED: "E[Psi^{*-1}_{E~|Z+-_[n]}(I_{Z+-_[n]}(W;R_[n]))]",
    CIMI_STRENGTHENED: "(1/n) sum_i E[Psi^{*-1}_{E~_i|Z+-_[n]}(I_{Z+-_[n]}(W;R_i))]",
    ICIMI_BOUNDED: "((b-a)/n) sum_i E[sqrt(2 I_{Z_i+-}(W;R_i))] | ((b-a)/n) sum_i sqrt(2 I(W;R_i|Z_i+-))",
}


@dataclass(frozen=True)
class BoundReport:
    """One evaluated generalization bound.

    ``info_terms`` holds the information quantities (nats) fed to the
    conjugate: one entry for whole-sample bounds, one per index ``i`` for
    individual bounds.
    """

    bound_name: str
    value: float
    info_terms: Tuple[float, ...] = ()
    conjugate_kind: str = ""
    method: str = "exact"
    std_error: float = 0.0
    n: int = 0
    variant: str = ""
    status: str = OK
    flags: Tuple[str, ...] = ()
    extras: Dict[str, float] = field(default_factory=dict)

    @property
    def applicable(self) -> bool:
        return self.status == OK

    @property
    def info_term(self) -> float:
        """Scalar summary of ``info_terms`` (their mean for individual bounds)."""
        if not self.info_terms:
            return math.nan
        return sum(self.info_terms) / len(self.info_terms)

    def key(self) -> Tuple[str, str]:
        return (self.bound_name, self.variant)


@dataclass(frozen=True)
class BoundComparison:
    """Pairs ``(name_a, name_b, value_a, value_b, relation)`` meaning ``a <relation> b``."""

    pairs: List[Tuple[str, str, float, float, str]]
    tol: float = 1e-12

    def violations(self) -> List[Tuple[str, str, float, float, str]]:
        out = []
        for a, b, va, vb, rel in self.pairs:
            if rel == "<=" and not va <= vb + self.tol:
                out.append((a, b, va, vb, rel))
            elif rel == ">=" and not va + self.tol >= vb:
                out.append((a, b, va, vb, rel))
        return out

    @property
    def ok(self) -> bool:
        return not self.violations()
