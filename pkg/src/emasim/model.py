"""Reluctance-network model of a spring-returned electromagnetic actuator.

The device is a 1-DOF positioning system: a multi-turn coil on a fixed
magnetic circuit attracts a mobile armature against a return spring and a
viscous seal.  State vector:

    x1  armature position / airgap length [m]
    x2  armature velocity [m/s]
    x3  coil current [A]

The magnetic circuit is a series reluctance network: a constant core
reluctance ``rho_0`` plus two airgap reluctances ``x1 / (mu_0 * S_i(x1))``.
Flux fringing makes the effective airgap surfaces ``S_i`` grow with the gap
length, which is captured by pluggable surface models (constant, weighted,
geometric, tabulated).  From the network:

    rho(x1) = x1/(mu_0 S1(x1)) + x1/(mu_0 S3(x1)) + rho_0     [1/H]
    L(x1)   = N^2 / rho(x1)                                   [H]
    mu(x1)  = -dL/dx1                                         [H/m]

``mu`` is the position gradient of the inductance; the magnetic pull on the
armature scales with ``x3^2 * mu(x1)``.  All functions here are pure and the
parameter containers are frozen, so everything is safe to share across
threads and batch runs.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

MU_0 = 4.0e-7 * math.pi  # vacuum permeability [H/m]

# Grid used for construction-time containment checks of surface models.
_VALIDATION_POINTS = 41
# Slack for containment checks: the band edges themselves are admissible.
_CONTAINMENT_RTOL = 1e-9


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class SurfaceBounds:
    """Admissible band for each effective airgap surface [m^2].

    The controller never sees the realized surfaces, only this band; the
    interval envelopes for reluctance, inductance and ``mu`` are built from
    it.  Equal lower/upper values express a certain (uncertainty-free)
    surface.
    """

    s1_lower: float
    s1_upper: float
    s3_lower: float
    s3_upper: float

    def __post_init__(self) -> None:
        for name in ("s1_lower", "s1_upper", "s3_lower", "s3_upper"):
            value = _require_finite(name, getattr(self, name))
            if value <= 0.0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.s1_lower > self.s1_upper:
            raise ValueError("s1_lower must not exceed s1_upper")
        if self.s3_lower > self.s3_upper:
            raise ValueError("s3_lower must not exceed s3_upper")

    def lower(self, gap_index: int) -> float:
        return self.s1_lower if gap_index == 1 else self.s3_lower

    def upper(self, gap_index: int) -> float:
        return self.s1_upper if gap_index == 1 else self.s3_upper


@dataclass(frozen=True, kw_only=True)
class FringingModel:
    """Base class for effective-airgap-surface models.

    Concrete variants implement ``surface`` and ``surface_slope`` for both
    gaps (index 1 and 3).  ``stroke`` is the position range [0, stroke] over
    which the model is validated against ``bounds`` at construction.
    """

    bounds: SurfaceBounds
    stroke: float = 6.0e-3  # validated travel range [m]

    def __post_init__(self) -> None:
        stroke = _require_finite("stroke", self.stroke)
        if stroke <= 0.0:
            raise ValueError(f"stroke must be positive, got {stroke}")
        self._validate_containment()

    def _validate_containment(self) -> None:
        grid = np.linspace(0.0, self.stroke, _VALIDATION_POINTS)
        for gap in (1, 3):
            s = np.asarray(self.surface(grid, gap), dtype=float)
            lo = self.bounds.lower(gap) * (1.0 - _CONTAINMENT_RTOL)
            hi = self.bounds.upper(gap) * (1.0 + _CONTAINMENT_RTOL)
            if np.any(s <= 0.0):
                raise ValueError(f"surface S{gap} must stay positive over the stroke")
            if np.any(s < lo) or np.any(s > hi):
                raise ValueError(
                    f"surface S{gap} leaves its admissible band "
                    f"[{self.bounds.lower(gap):.6g}, {self.bounds.upper(gap):.6g}] m^2 "
                    f"on [0, {self.stroke:.6g}] m"
                )

    def surface(self, x1, gap_index: int):
        raise NotImplementedError

    def surface_slope(self, x1, gap_index: int):
        """dS_i/dx1 at x1 [m]; zero for gap-independent variants."""
        raise NotImplementedError


@dataclass(frozen=True, kw_only=True)
class ConstantSurfaces(FringingModel):
    """Gap-independent surfaces: fringing folded into fixed effective areas."""

    s1: float
    s3: float

    def __post_init__(self) -> None:
        for name in ("s1", "s3"):
            if _require_finite(name, getattr(self, name)) <= 0.0:
                raise ValueError(f"{name} must be positive")
        super().__post_init__()

    def surface(self, x1, gap_index: int):
        value = self.s1 if gap_index == 1 else self.s3
        return np.full_like(np.asarray(x1, dtype=float), value) if np.ndim(x1) else value

    def surface_slope(self, x1, gap_index: int):
        return np.zeros_like(np.asarray(x1, dtype=float)) if np.ndim(x1) else 0.0


@dataclass(frozen=True, kw_only=True)
class WeightedSurfaces(FringingModel):
    """Core cross-sections scaled by empirical expansion weights.

    ``S_i = alpha_i * S_CMi`` with the magnetic-circuit sections ``S_CMi``
    and dimensionless weights ``alpha_i >= 1`` typically fitted to field
    simulations.  Gap-independent, like :class:`ConstantSurfaces`.
    """

    alpha1: float
    alpha3: float
    s_cm1: float
    s_cm3: float

    def __post_init__(self) -> None:
        for name in ("alpha1", "alpha3", "s_cm1", "s_cm3"):
            if _require_finite(name, getattr(self, name)) <= 0.0:
                raise ValueError(f"{name} must be positive")
        super().__post_init__()

    def surface(self, x1, gap_index: int):
        value = self.alpha1 * self.s_cm1 if gap_index == 1 else self.alpha3 * self.s_cm3
        return np.full_like(np.asarray(x1, dtype=float), value) if np.ndim(x1) else value

    def surface_slope(self, x1, gap_index: int):
        return np.zeros_like(np.asarray(x1, dtype=float)) if np.ndim(x1) else 0.0


@dataclass(frozen=True, kw_only=True)
class GeometricSurfaces(FringingModel):
    """Rectangular-pole expansion model: ``S_i(x1) = (a_i + x1)(b_i + x1)``.

    The flux tube widens by roughly the gap length on each side of an
    ``a_i x b_i`` pole face.  Valid while ``x1^2 < a_i * b_i``; beyond that
    the gap reluctance ``x1/S_i(x1)`` stops growing with the gap and the
    network model breaks down, so the stroke is required to stay below it.
    """

    a1: float
    b1: float
    a3: float
    b3: float

    def __post_init__(self) -> None:
        for name in ("a1", "b1", "a3", "b3"):
            if _require_finite(name, getattr(self, name)) <= 0.0:
                raise ValueError(f"{name} must be positive")
        limit = math.sqrt(min(self.a1 * self.b1, self.a3 * self.b3))
        if self.stroke >= limit:
            raise ValueError(
                f"stroke {self.stroke:.6g} m must stay below sqrt(a*b) = {limit:.6g} m "
                "for the gap reluctance to remain increasing"
            )
        super().__post_init__()

    def surface(self, x1, gap_index: int):
        a, b = (self.a1, self.b1) if gap_index == 1 else (self.a3, self.b3)
        x = np.asarray(x1, dtype=float) if np.ndim(x1) else x1
        return (a + x) * (b + x)

    def surface_slope(self, x1, gap_index: int):
        a, b = (self.a1, self.b1) if gap_index == 1 else (self.a3, self.b3)
        x = np.asarray(x1, dtype=float) if np.ndim(x1) else x1
        return a + b + 2.0 * x


@dataclass(frozen=True, kw_only=True)
class PiecewiseSurfaces(FringingModel):
    """Tabulated surfaces, linearly interpolated between knots.

    Used for Monte-Carlo realizations of admissible fringing behaviour (see
    :func:`emasim.sim.sample_fringing`) and for surfaces fitted to field
    data.  Constant extrapolation outside the knot range.
    """

    knots: tuple[float, ...]
    s1_values: tuple[float, ...]
    s3_values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.knots) < 2:
            raise ValueError("need at least two knots")
        if len(self.s1_values) != len(self.knots) or len(self.s3_values) != len(self.knots):
            raise ValueError("surface tables must match the knot count")
        if any(b <= a for a, b in zip(self.knots, self.knots[1:])):
            raise ValueError("knots must be strictly increasing")
        if min(self.s1_values) <= 0.0 or min(self.s3_values) <= 0.0:
            raise ValueError("tabulated surfaces must be positive")
        super().__post_init__()

    @cached_property
    def _arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.asarray(self.knots, dtype=float),
            np.asarray(self.s1_values, dtype=float),
            np.asarray(self.s3_values, dtype=float),
        )

    def surface(self, x1, gap_index: int):
        xk, s1, s3 = self._arrays
        out = np.interp(x1, xk, s1 if gap_index == 1 else s3)
        return out if np.ndim(x1) else float(out)

    def surface_slope(self, x1, gap_index: int):
        xk, s1, s3 = self._arrays
        values = s1 if gap_index == 1 else s3
        slopes = np.diff(values) / np.diff(xk)
        idx = np.clip(np.searchsorted(xk, x1, side="right") - 1, 0, len(slopes) - 1)
        out = np.where((np.asarray(x1) <= xk[0]) | (np.asarray(x1) >= xk[-1]), 0.0, slopes[idx])
        return out if np.ndim(x1) else float(out)


@dataclass(frozen=True)
class State:
    """Plant state: position [m], velocity [m/s], coil current [A]."""

    x1: float
    x2: float
    x3: float

    def __post_init__(self) -> None:
        for name in ("x1", "x2", "x3"):
            _require_finite(name, getattr(self, name))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x1, self.x2, self.x3)


@dataclass(frozen=True)
class PlantParams:
    """Physical constants of the actuator plus the fringing surface model.

    rho_x     airgap reluctance slope [1/(H m)]; the combined gap term of the
              network when the surfaces are held at their nominal values.
              Also the fixed numerator used by the mu envelopes.
    rho_0     series reluctance of the iron circuit [1/H]
    N         coil turns
    lambda_f  viscous friction coefficient [N s/m]
    K         return-spring stiffness [N/m]
    m         moving mass [kg]
    R         coil resistance [ohm]
    mu_0      vacuum permeability [H/m]
    x0        initial state
    fringing  surface model realizing the true plant
    hard_stop when True, runs clamp x1 at 0 with a perfectly inelastic
              contact (velocity zeroed); off by default.
    """

    rho_x: float
    rho_0: float
    N: int
    lambda_f: float
    K: float
    m: float
    R: float
    fringing: FringingModel
    mu_0: float = MU_0
    x0: State = State(0.0, 0.0, 0.0)
    hard_stop: bool = False

    def __post_init__(self) -> None:
        checks = [
            ("rho_x", self.rho_x, self.rho_x > 0.0),
            ("rho_0", self.rho_0, self.rho_0 > 0.0),
            ("N", self.N, self.N >= 1),
            ("lambda_f", self.lambda_f, self.lambda_f >= 0.0),
            ("K", self.K, self.K >= 0.0),
            ("m", self.m, self.m > 0.0),
            ("R", self.R, self.R > 0.0),
            ("mu_0", self.mu_0, self.mu_0 > 0.0),
        ]
        for name, value, ok in checks:
            _require_finite(name, value)
            if not ok:
                raise ValueError(f"invalid plant parameter {name}={value}")

    @property
    def n_sq(self) -> float:
        return float(self.N) ** 2


def airgap_surface(x1: float, model: FringingModel, gap_index: int) -> float:
    """Effective flux surface S_i(x1) [m^2] of airgap ``gap_index`` (1 or 3)."""
    if gap_index not in (1, 3):
        raise ValueError(f"gap_index must be 1 or 3, got {gap_index}")
    _require_finite("x1", x1)
    return float(model.surface(x1, gap_index))


def reluctance(x1: float, p: PlantParams):
    """Total series reluctance rho(x1) [1/H].

    With gap-independent surfaces this is affine in the gap length:
    ``rho_x * x1 + rho_0``.
    """
    if np.ndim(x1) == 0:
        _require_finite("x1", x1)
    s1 = p.fringing.surface(x1, 1)
    s3 = p.fringing.surface(x1, 3)
    return x1 / (p.mu_0 * s1) + x1 / (p.mu_0 * s3) + p.rho_0


def inductance(x1: float, p: PlantParams):
    """Coil inductance L(x1) = N^2 / rho(x1) [H]; decreasing in the gap."""
    return p.n_sq / reluctance(x1, p)


def mu_coefficient(x1: float, p: PlantParams):
    """Inductance gradient mu(x1) = -dL/dx1 [H/m], exact for every variant.

    Differentiates the active surface model analytically; for gap-independent
    surfaces this reduces to ``N^2 * rho_slope / rho(x1)^2``.
    """
    if np.ndim(x1) == 0:
        _require_finite("x1", x1)
    s1 = p.fringing.surface(x1, 1)
    s3 = p.fringing.surface(x1, 3)
    d1 = p.fringing.surface_slope(x1, 1)
    d3 = p.fringing.surface_slope(x1, 3)
    rho = x1 / (p.mu_0 * s1) + x1 / (p.mu_0 * s3) + p.rho_0
    # d(rho)/dx1 through the quotient rule on each gap term
    rho_slope = ((s1 - x1 * d1) / (s1 * s1) + (s3 - x1 * d3) / (s3 * s3)) / p.mu_0
    return p.n_sq * rho_slope / (rho * rho)


def magnetic_energy(x1: float, x3: float, p: PlantParams) -> float:
    """Stored magnetic co-energy 0.5 * L(x1) * x3^2 [J]."""
    _require_finite("x3", x3)
    return 0.5 * inductance(x1, p) * x3 * x3


def magnetic_force(x1: float, x3: float, p: PlantParams) -> float:
    """Magnetic pull -0.5 * x3^2 * mu(x1) [N].

    Signed toward closing the gap (always <= 0 in this orientation).  The
    state equations in :func:`plant_derivative` use the opposite axis
    orientation for the mechanical balance; see that docstring.
    """
    _require_finite("x3", x3)
    return -0.5 * x3 * x3 * mu_coefficient(x1, p)


def external_force(x1: float, x2: float, p: PlantParams) -> float:
    """Spring plus viscous drag: ``-K*x1 - lambda_f*x2`` [N]."""
    _require_finite("x1", x1)
    _require_finite("x2", x2)
    return -p.lambda_f * x2 - p.K * x1


def plant_derivative(s: State, u: float, p: PlantParams) -> tuple[float, float, float]:
    """Right-hand side of the three state equations.

        dx1 = x2
        dx2 = ( 0.5 * x3^2 * mu(x1) + F_ext(x1, x2) ) / m
        dx3 = ( u - R*x3 + x2*x3*mu(x1) ) / L(x1)

    The magnetic term enters the force balance with a positive sign: the
    position axis is oriented so that coil current drives x1 up while the
    spring restores it toward zero.  :func:`magnetic_force` reports the
    same interaction in the gap-closing orientation.
    """
    _require_finite("u", u)
    x1, x2, x3 = s.x1, s.x2, s.x3
    mu = mu_coefficient(x1, p)
    ind = inductance(x1, p)
    d2 = (0.5 * x3 * x3 * mu + external_force(x1, x2, p)) / p.m
    d3 = (u - p.R * x3 + x2 * x3 * mu) / ind
    return (x2, d2, d3)


RateFn = Callable[[float, float, float, float], tuple[float, float, float]]


def make_rate_fn(p: PlantParams) -> RateFn:
    """Build a fast scalar closure equivalent to :func:`plant_derivative`.

    Specialized per surface variant so the fixed-step integrator avoids
    attribute lookups and array dispatch in its inner loop.  Inputs are not
    validated; the simulator checks the state for divergence once per step.
    """
    n_sq = p.n_sq
    rho_0 = p.rho_0
    inv_m = 1.0 / p.m
    lam = p.lambda_f
    spring = p.K
    res = p.R
    mu0 = p.mu_0
    fr = p.fringing

    if isinstance(fr, (ConstantSurfaces, WeightedSurfaces)):
        s1 = fr.s1 if isinstance(fr, ConstantSurfaces) else fr.alpha1 * fr.s_cm1
        s3 = fr.s3 if isinstance(fr, ConstantSurfaces) else fr.alpha3 * fr.s_cm3
        rho_slope = 1.0 / (mu0 * s1) + 1.0 / (mu0 * s3)

        def rate(x1: float, x2: float, x3: float, u: float) -> tuple[float, float, float]:
            rho = rho_slope * x1 + rho_0
            mu = n_sq * rho_slope / (rho * rho)
            inv_l = rho / n_sq
            d2 = (0.5 * x3 * x3 * mu - lam * x2 - spring * x1) * inv_m
            d3 = (u - res * x3 + x2 * x3 * mu) * inv_l
            return (x2, d2, d3)

        return rate

    if isinstance(fr, GeometricSurfaces):
        a1, b1, a3, b3 = fr.a1, fr.b1, fr.a3, fr.b3

        def rate(x1: float, x2: float, x3: float, u: float) -> tuple[float, float, float]:
            s1 = (a1 + x1) * (b1 + x1)
            s3 = (a3 + x1) * (b3 + x1)
            rho = (x1 / s1 + x1 / s3) / mu0 + rho_0
            rho_slope = ((a1 * b1 - x1 * x1) / (s1 * s1) + (a3 * b3 - x1 * x1) / (s3 * s3)) / mu0
            mu = n_sq * rho_slope / (rho * rho)
            inv_l = rho / n_sq
            d2 = (0.5 * x3 * x3 * mu - lam * x2 - spring * x1) * inv_m
            d3 = (u - res * x3 + x2 * x3 * mu) * inv_l
            return (x2, d2, d3)

        return rate

    if isinstance(fr, PiecewiseSurfaces):
        knots = list(fr.knots)
        tables = {}
        for gap, values in ((1, fr.s1_values), (3, fr.s3_values)):
            vals = list(values)
            slopes = [
                (vb - va) / (xb - xa)
                for (xa, xb), (va, vb) in zip(zip(knots, knots[1:]), zip(vals, vals[1:]))
            ]
            tables[gap] = (vals, slopes)
        x_lo, x_hi = knots[0], knots[-1]
        n_seg = len(knots) - 1

        def surf(x1: float, gap: int) -> tuple[float, float]:
            vals, slopes = tables[gap]
            if x1 <= x_lo:
                return vals[0], 0.0
            if x1 >= x_hi:
                return vals[-1], 0.0
            i = bisect.bisect_right(knots, x1) - 1
            i = n_seg - 1 if i >= n_seg else i
            return vals[i] + slopes[i] * (x1 - knots[i]), slopes[i]

        def rate(x1: float, x2: float, x3: float, u: float) -> tuple[float, float, float]:
            s1, d1 = surf(x1, 1)
            s3, d3s = surf(x1, 3)
            rho = (x1 / s1 + x1 / s3) / mu0 + rho_0
            rho_slope = ((s1 - x1 * d1) / (s1 * s1) + (s3 - x1 * d3s) / (s3 * s3)) / mu0
            mu = n_sq * rho_slope / (rho * rho)
            inv_l = rho / n_sq
            d2 = (0.5 * x3 * x3 * mu - lam * x2 - spring * x1) * inv_m
            d3 = (u - res * x3 + x2 * x3 * mu) * inv_l
            return (x2, d2, d3)

        return rate

    def rate(x1: float, x2: float, x3: float, u: float) -> tuple[float, float, float]:
        return plant_derivative(State(x1, x2, x3), u, p)

    return rate
