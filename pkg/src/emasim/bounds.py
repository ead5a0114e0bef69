"""Interval envelopes for the uncertain magnetic quantities.

The fringing surfaces are only known to lie in a band ``S_lo <= S(x1) <=
S_hi``.  Substituting the band edges into the reluctance network gives
guaranteed envelopes for rho, L and mu at every gap length; these are the
only view of the plant the controller is allowed to use.  Note the
cross-wiring: the *upper* surfaces give the *lower* reluctance, and the
reluctance envelope order flips again through the reciprocal for the
inductance.

The mu envelopes keep the nominal airgap slope ``rho_x`` in the numerator
and vary only the squared reluctance, matching the affine-network form of
the coefficient ``N^2 rho_x / rho(x1)^2``.  They therefore bound that
network coefficient for every admissible surface realization; the exact
inductance gradient of a strongly gap-dependent realization can leave the
band close to zero gap, where its surface value differs most from the
nominal slope.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import PlantParams, inductance, mu_coefficient, reluctance


@dataclass(frozen=True)
class EnvelopeTriple:
    """Lower / nominal / upper values of one magnetic quantity at a gap length."""

    lower: float
    nominal: float
    upper: float

    def __post_init__(self) -> None:
        if not (self.lower <= self.upper):
            raise ValueError(f"envelope out of order: {self.lower} > {self.upper}")


class Envelopes(NamedTuple):
    rho: EnvelopeTriple
    inductance: EnvelopeTriple
    mu: EnvelopeTriple


def rho_upper_slope(p: PlantParams) -> float:
    """d(rho_hi)/dx1 [1/(H m)]: gap slope with the surfaces at their lower edge."""
    b = p.fringing.bounds
    return (1.0 / b.s1_lower + 1.0 / b.s3_lower) / p.mu_0


def rho_lower_slope(p: PlantParams) -> float:
    """d(rho_lo)/dx1 [1/(H m)]: gap slope with the surfaces at their upper edge."""
    b = p.fringing.bounds
    return (1.0 / b.s1_upper + 1.0 / b.s3_upper) / p.mu_0


def rho_bounds(x1, p: PlantParams):
    """Reluctance envelope (rho_lo, rho_hi) [1/H] at gap length ``x1``.

    rho_lo substitutes the upper surfaces, rho_hi the lower ones; both
    collapse to ``rho_0`` at zero gap.
    """
    lo = rho_lower_slope(p) * x1 + p.rho_0
    hi = rho_upper_slope(p) * x1 + p.rho_0
    return lo, hi


def inductance_bounds(x1, p: PlantParams):
    """Inductance envelope (L_lo, L_hi) [H]; order reverses through 1/rho."""
    rho_lo, rho_hi = rho_bounds(x1, p)
    return p.n_sq / rho_hi, p.n_sq / rho_lo


def mu_bounds(x1, p: PlantParams):
    """Envelope (mu_lo, mu_hi) [H/m] for the inductance gradient.

    ``mu_lo = N^2 rho_x / rho_hi^2`` and ``mu_hi = N^2 rho_x / rho_lo^2``
    with the nominal ``rho_x`` held fixed in the numerator.
    """
    rho_lo, rho_hi = rho_bounds(x1, p)
    num = p.n_sq * p.rho_x
    return num / (rho_hi * rho_hi), num / (rho_lo * rho_lo)


def mu_lower(x1, p: PlantParams):
    """Worst-case (smallest) mu at ``x1`` [H/m]; the backstepping gain uses it."""
    rho_hi = rho_upper_slope(p) * x1 + p.rho_0
    return p.n_sq * p.rho_x / (rho_hi * rho_hi)


def mu_lower_slope(x1, p: PlantParams):
    """d(mu_lo)/dx1 [H/m^2]; closed form since rho_hi is affine in x1."""
    slope = rho_upper_slope(p)
    rho_hi = slope * x1 + p.rho_0
    return -2.0 * p.n_sq * p.rho_x * slope / (rho_hi ** 3)


def envelopes(x1: float, p: PlantParams) -> Envelopes:
    """Lower/nominal/upper triples for rho, L and mu at one gap length."""
    r_lo, r_hi = rho_bounds(x1, p)
    l_lo, l_hi = inductance_bounds(x1, p)
    m_lo, m_hi = mu_bounds(x1, p)
    return Envelopes(
        rho=EnvelopeTriple(float(r_lo), float(reluctance(x1, p)), float(r_hi)),
        inductance=EnvelopeTriple(float(l_lo), float(inductance(x1, p)), float(l_hi)),
        mu=EnvelopeTriple(float(m_lo), float(mu_coefficient(x1, p)), float(m_hi)),
    )


def envelope_table(p: PlantParams, x1_grid) -> dict[str, np.ndarray]:
    """Vectorized envelope columns over a gap-length grid (for CSV export)."""
    x1 = np.asarray(x1_grid, dtype=float)
    rho_lo, rho_hi = rho_bounds(x1, p)
    l_lo, l_hi = inductance_bounds(x1, p)
    m_lo, m_hi = mu_bounds(x1, p)
    return {
        "x1": x1,
        "rho_lo": rho_lo,
        "rho_hi": rho_hi,
        "L_lo": l_lo,
        "L_hi": l_hi,
        "mu_lo": m_lo,
        "mu_hi": m_hi,
    }
