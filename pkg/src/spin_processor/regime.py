"""Excitation-regime classification of a drive amplitude.

Three scales set the bands: the typical spacing between neighbouring
transition frequencies ``t1 = 2^(-2N) omega_loc``, the island scale
``t2 = 2^N t1`` and the full spectral width ``t3 = omega_loc``.  A factor
``kappa`` turns "much less than" into a concrete ratio:

=========================  ==============================
SingleTransition           omega <  t1/kappa
InhomogeneousEnsemble      t1*kappa <= omega <= t2/kappa
CollectiveCoherent         t2/kappa <  omega <  t2*kappa
ThermodynamicSaturation    t2*kappa <= omega <= t3/kappa
HardPulse                  omega >  t3*kappa
=========================  ==============================

Anything else lies in one of the two gaps and is reported as a crossover
between the neighbouring regimes.  For ``2^N < kappa^2`` (``N <= 3`` at the
default ``kappa = 3``) the inner bands collapse; gaps then take precedence and
the report carries a diagnostic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

TWO_PI = 2.0 * math.pi
DEFAULT_KAPPA = 3.0


class Regime(enum.IntEnum):
    SingleTransition = 1
    InhomogeneousEnsemble = 2
    CollectiveCoherent = 3
    ThermodynamicSaturation = 4
    HardPulse = 5


@dataclass(frozen=True)
class RegimeReport:
    """Classification result.

    ``regime`` is set for a pure regime; ``crossover`` holds the two adjacent
    regimes otherwise.  ``thresholds`` are ``(t1, t2, t3)`` in rad/s.
    """

    omega: float
    thresholds: tuple[float, float, float]
    kappa: float
    regime: Optional[Regime] = None
    crossover: Optional[tuple[Regime, Regime]] = None
    diagnostic: Optional[str] = None

    @property
    def label(self) -> str:
        if self.regime is not None:
            return self.regime.name
        a, b = self.crossover
        return f"Crossover({a.name},{b.name})"

    @property
    def rank(self) -> float:
        """Position along the regime sequence; crossovers sit halfway."""
        if self.regime is not None:
            return float(self.regime)
        return (self.crossover[0] + self.crossover[1]) / 2.0

    @property
    def edges(self) -> list[float]:
        t1, t2, t3 = self.thresholds
        k = self.kappa
        return [t1 / k, t1 * k, t2 / k, t2 * k, t3 / k, t3 * k]

    def margin(self) -> tuple[float, float]:
        """``(edge, decades)``: nearest band edge and log10 distance to it."""
        edge = min(self.edges, key=lambda e: abs(math.log10(self.omega / e)))
        return edge, abs(math.log10(self.omega / edge))

    def to_dict(self) -> dict:
        t = self.thresholds
        edge, decades = self.margin()
        out = {
            "label": self.label,
            "omega_rad_s": self.omega,
            "omega_hz": self.omega / TWO_PI,
            "kappa": self.kappa,
            "thresholds_rad_s": {"delta_omega": t[0], "island": t[1], "omega_loc": t[2]},
            "thresholds_hz": {
                "delta_omega": t[0] / TWO_PI,
                "island": t[1] / TWO_PI,
                "omega_loc": t[2] / TWO_PI,
            },
            "nearest_edge_rad_s": edge,
            "margin_decades": decades,
        }
        if self.diagnostic:
            out["diagnostic"] = self.diagnostic
        return out


def spacing_estimate(n_spins: int, omega_loc: float) -> float:
    """Typical neighbour spacing ``2^(-2N) omega_loc`` (exact power-of-two scaling)."""
    if n_spins < 0:
        raise ValueError("n_spins must be >= 0")
    if not omega_loc > 0:
        raise ValueError("omega_loc must be positive")
    return math.ldexp(omega_loc, -2 * n_spins)


def classify_regime(
    omega: float, n_spins: int, omega_loc: float, kappa: float = DEFAULT_KAPPA
) -> RegimeReport:
    if not omega > 0:
        raise ValueError("omega must be positive")
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    t1 = spacing_estimate(n_spins, omega_loc)
    t2 = math.ldexp(t1, n_spins)
    t3 = float(omega_loc)
    k = kappa
    report = dict(omega=float(omega), thresholds=(t1, t2, t3), kappa=float(k))
    R = Regime
    if t1 * k > t2 / k:
        report["diagnostic"] = (
            f"bands overlap for N={n_spins}, kappa={k}: 2^N < kappa^2, "
            "intermediate regimes are crossover-dominated"
        )

    if omega < t1 / k:
        return RegimeReport(regime=R.SingleTransition, **report)
    if omega > t3 * k:
        return RegimeReport(regime=R.HardPulse, **report)
    if omega < t1 * k:
        return RegimeReport(crossover=(R.SingleTransition, R.InhomogeneousEnsemble), **report)
    if omega > t3 / k:
        return RegimeReport(crossover=(R.ThermodynamicSaturation, R.HardPulse), **report)
    if omega <= t2 / k:
        return RegimeReport(regime=R.InhomogeneousEnsemble, **report)
    if omega < t2 * k:
        return RegimeReport(regime=R.CollectiveCoherent, **report)
    return RegimeReport(regime=R.ThermodynamicSaturation, **report)
