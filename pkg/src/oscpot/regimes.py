"""Parameter map for the singular potential problem.

The equation under study is

    du/dt - Lap(u) - eps^(-gamma) W(x/eps, t/eps^k) u = f

on the unit box with Dirichlet boundary, W a zero-mean-in-the-right-sense
trigonometric potential on the unit torus.  The pair (k, gamma) decides
which corrector produces the effective potential in the limit and at
which rate in eps the solutions converge.  gamma is never free: it is
either 1 or k - 1, and k - 1 is only meaningful for 2 < k <= 3.

resolve_regime() is the single entry point that turns (k, gamma mode,
potential) into a fully resolved RegimeSpec or rejects the combination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import UnsupportedK
from .potential import AssumptionId, GammaMode, TrigField, classify_assumption


class RegimeFamily(Enum):
    """Qualitative behaviour of the limit, keyed by (k, gamma)."""

    CRITICAL = "critical"                  # k = 2, gamma = 1
    SUPERCRITICAL = "supercritical"        # k > 2, gamma = 1
    SUBCRITICAL = "subcritical"            # 1 < k < 2, gamma = 1
    SLOW_TIME = "slow_time"                # 0 < k <= 1, gamma = 1
    FROZEN_TIME = "frozen_time"            # k = 0, gamma = 1
    STRONG_FAST_TIME = "strong_fast_time"  # 2 < k <= 3, gamma = k - 1


#: Corrector recipe used for the effective potential, per family.
CORRECTOR_RECIPE = {
    RegimeFamily.CRITICAL: "chi1",
    RegimeFamily.SUPERCRITICAL: "chi2",
    RegimeFamily.SUBCRITICAL: "chi3",
    RegimeFamily.SLOW_TIME: "chi3",
    RegimeFamily.FROZEN_TIME: "chi3",
    RegimeFamily.STRONG_FAST_TIME: "chi4",
}


@dataclass(frozen=True)
class RegimeSpec:
    """Resolved parameter regime; immutable record attached to all reports."""

    k: float
    gamma: float
    gamma_mode: GammaMode
    assumption: AssumptionId
    family: RegimeFamily
    rate: float
    chain_depth: int | None = None
    sign_override: bool = False

    @property
    def corrector(self) -> str:
        return CORRECTOR_RECIPE[self.family]

    @property
    def time_dependent_limit(self) -> bool:
        return self.family is RegimeFamily.FROZEN_TIME

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "gamma": self.gamma,
            "gamma_mode": self.gamma_mode.value,
            "assumption": self.assumption.value,
            "family": self.family.value,
            "corrector": self.corrector,
            "rate": self.rate,
            "chain_depth": self.chain_depth,
            "sign_override": self.sign_override,
        }


def _family_for(k: float, gamma_mode: GammaMode) -> RegimeFamily:
    if gamma_mode is GammaMode.K_MINUS_1:
        return RegimeFamily.STRONG_FAST_TIME
    if k == 0.0:
        return RegimeFamily.FROZEN_TIME
    if k <= 1.0:
        return RegimeFamily.SLOW_TIME
    if k < 2.0:
        return RegimeFamily.SUBCRITICAL
    if k == 2.0:
        return RegimeFamily.CRITICAL
    return RegimeFamily.SUPERCRITICAL


def theoretical_rate(k: float, family: RegimeFamily) -> float:
    """Proven convergence exponent p in ||u_eps - u_hom|| = O(eps^p)."""
    if family is RegimeFamily.CRITICAL:
        return 1.0
    if family is RegimeFamily.SUPERCRITICAL:
        return min(k - 2.0, 1.0)
    if family is RegimeFamily.SUBCRITICAL:
        return min(2.0 - k, k - 1.0)
    if family is RegimeFamily.SLOW_TIME:
        return k
    if family is RegimeFamily.FROZEN_TIME:
        return 1.0
    if family is RegimeFamily.STRONG_FAST_TIME:
        return k - 2.0
    raise ValueError(f"unknown regime family {family!r}")


def iteration_depth(k: float) -> int:
    """Smallest positive integer i with i*(k-1) >= k, for 1 < k < 2.

    This is how many iterated time-correctors the subcritical argument
    needs before the residual drops below the target order.
    """
    if not 1.0 < k < 2.0:
        raise ValueError(f"iteration depth is defined for 1 < k < 2, got {k}")
    i = 1
    while i * (k - 1.0) < k - 1e-12:
        i += 1
    return i


def resolve_regime(k: float, gamma_mode: GammaMode, W: TrigField,
                   sign_override: bool = False) -> RegimeSpec:
    """Classify (k, gamma_mode, W) and assemble the full regime record.

    Raises UnsupportedK when the (k, gamma) pairing itself is outside the
    map, NoApplicableRegime when the pairing is fine but W violates the
    admissibility condition.
    """
    if not isinstance(k, (int, float)) or math.isnan(k) or math.isinf(k):
        raise ValueError(f"k must be a finite number, got {k!r}")
    k = float(k)
    if k < 0:
        raise ValueError(f"time exponent k must be >= 0, got {k}")
    if gamma_mode is GammaMode.K_MINUS_1 and not 2.0 < k <= 3.0:
        # Outside 2 < k <= 3 no amplitude exponent of the form k - 1
        # produces a nontrivial limit, so the pairing itself is rejected.
        raise UnsupportedK(
            f"gamma = k - 1 is supported only for 2 < k <= 3, got k = {k}")
    assumption = classify_assumption(W, k, gamma_mode)
    family = _family_for(k, gamma_mode)
    gamma = k - 1.0 if gamma_mode is GammaMode.K_MINUS_1 else 1.0
    depth = iteration_depth(k) if family is RegimeFamily.SUBCRITICAL else None
    return RegimeSpec(
        k=k,
        gamma=gamma,
        gamma_mode=gamma_mode,
        assumption=assumption,
        family=family,
        rate=theoretical_rate(k, family),
        chain_depth=depth,
        sign_override=sign_override,
    )
