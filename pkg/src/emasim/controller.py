"""Combined backstepping / sliding-mode position controller.

Two nested loops, designed against the interval envelopes of
:mod:`emasim.bounds` rather than the true plant:

* An outer backstepping loop regulates position and velocity.  In error
  coordinates ``z1 = x1 - y_r`` and ``z2 = x2 + alpha1*z1`` it demands the
  squared coil current

      x3d^2 = -(2 m / mu_lo) * alpha2 * z2,

  clamped at zero where the right-hand side is negative (the magnetic pull
  is unidirectional; the spring supplies the restoring force).  With the
  design matrix Q negative definite the error converges to a disc of radius
  ``delta / (alpha * theta)`` around the reference, where ``delta =
  (K/m) * |y_r|`` is the non-vanishing spring load at the setpoint.

* An inner first-order sliding-mode loop forces the real current onto the
  virtual one.  On the surface ``S = x3 - x3d`` the switching law
  ``u = -alpha3 * sign(S)`` with the worst-case gain

      alpha3 = R|x3d| + |(z2 - alpha1 z1)(S + x3d)| mu_hi
               + |dx3d/dt| L_hi(x1) + (2/m)|x3 + x3d| mu_hi + epsilon1

  reaches S = 0 in finite time for any admissible fringing realization.

The certificate for the outer loop (negative definiteness of Q, the
conservative disc radius) is computed by :func:`certify_gains`; simulation
refuses uncertified gains unless explicitly overridden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from . import bounds
from .model import PlantParams, State

# Where the worst-case mu is evaluated when sizing the virtual current:
# at the gap pushed out by the reference ("gap_plus_reference", default) or
# at the current gap ("gap").  The first is the more conservative reading
# and is what holds the steady-state position error below 0.1%; the second
# trades precision for a much smaller current/voltage demand.
MU_LOWER_MODES = ("gap_plus_reference", "gap")
DERIVATIVE_MODES = ("analytic", "filtered")


@dataclass(frozen=True)
class ControllerGains:
    """Control gains plus evaluation options.

    alpha1    position-loop rate [1/s]
    alpha2    velocity-loop rate [1/s]
    epsilon1  residual reaching margin [V]
    theta     fraction of the certified decay spent shrinking the disc, in (0, 1)
    """

    alpha1: float
    alpha2: float
    epsilon1: float
    theta: float = 0.9
    mu_lower_at: str = "gap_plus_reference"
    derivative_mode: str = "analytic"
    derivative_time_constant: float = 1.0e-4  # [s], filtered mode only
    boundary_layer: float = 0.0  # [A]; 0 keeps the pure sign law

    def __post_init__(self) -> None:
        if not (self.alpha1 > 0.0 and self.alpha2 > 0.0 and self.epsilon1 > 0.0):
            raise ValueError("alpha1, alpha2 and epsilon1 must be positive")
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if self.mu_lower_at not in MU_LOWER_MODES:
            raise ValueError(f"mu_lower_at must be one of {MU_LOWER_MODES}")
        if self.derivative_mode not in DERIVATIVE_MODES:
            raise ValueError(f"derivative_mode must be one of {DERIVATIVE_MODES}")
        if self.derivative_time_constant <= 0.0:
            raise ValueError("derivative_time_constant must be positive")
        if self.boundary_layer < 0.0:
            raise ValueError("boundary_layer must be non-negative")


@dataclass(frozen=True)
class GainCertificate:
    """Negative-definiteness certificate for the outer-loop design matrix.

    a, b        coupling coefficients ``1 - alpha1^2 + (lambda_f/m) alpha1 - K/m``
                and ``alpha1 - lambda_f/m``
    q           the symmetric 2x2 matrix ((-alpha1, a/2), (a/2, b - alpha2))
    eigenvalues sorted ascending
    negative_definite   both eigenvalues < 0
    alpha       |eigenvalue closest to zero|; the decay rate the Rayleigh
                bound actually certifies
    alpha_extreme       |most negative eigenvalue|; reported for comparison,
                overstates the certified decay
    delta       (K/m) * y_r_max, the non-vanishing spring load
    radius      delta / (alpha * theta), the certified disc radius
    radius_extreme      same with alpha_extreme (smaller, not certified)
    """

    gains: ControllerGains
    y_r_max: float
    a: float
    b: float
    q: tuple[tuple[float, float], tuple[float, float]]
    eigenvalues: tuple[float, float]
    negative_definite: bool
    alpha: float
    alpha_extreme: float
    delta: float
    radius: float
    radius_extreme: float

    @property
    def certified(self) -> bool:
        return self.negative_definite


def certify_gains(g: ControllerGains, p: PlantParams, y_r_max: float) -> GainCertificate:
    """Evaluate the outer-loop certificate for gains ``g`` on plant ``p``.

    Returns an uncertified (not an error) result when the design matrix
    fails negative definiteness.  ``y_r_max`` is the largest reference
    magnitude the certificate must cover.
    """
    lam_over_m = p.lambda_f / p.m
    a = 1.0 - g.alpha1 ** 2 + lam_over_m * g.alpha1 - p.K / p.m
    b = g.alpha1 - lam_over_m
    q11 = -g.alpha1
    q22 = b - g.alpha2
    q12 = a / 2.0
    det = q11 * q22 - q12 * q12
    # Symmetric 2x2 eigenvalues in closed form.
    tr = q11 + q22
    disc = math.sqrt(max(0.0, tr * tr - 4.0 * det))
    eig_lo = (tr - disc) / 2.0
    eig_hi = (tr + disc) / 2.0
    negative_definite = q11 < 0.0 and det > 0.0
    if negative_definite:
        alpha = abs(eig_hi)  # closest to zero
        alpha_extreme = abs(eig_lo)
    else:
        alpha = float("nan")
        alpha_extreme = float("nan")
    delta = (p.K / p.m) * abs(y_r_max)
    radius = delta / (alpha * g.theta) if negative_definite else float("inf")
    radius_extreme = delta / (alpha_extreme * g.theta) if negative_definite else float("inf")
    return GainCertificate(
        gains=g,
        y_r_max=float(y_r_max),
        a=a,
        b=b,
        q=((q11, q12), (q12, q22)),
        eigenvalues=(eig_lo, eig_hi),
        negative_definite=negative_definite,
        alpha=alpha,
        alpha_extreme=alpha_extreme,
        delta=delta,
        radius=radius,
        radius_extreme=radius_extreme,
    )


@dataclass(frozen=True)
class ErrorCoords:
    """Error coordinates of the two loops.

    z1, z2 are the backstepping errors; S the sliding surface value; x3d the
    virtual current and x3d_dot its time derivative as used in the gain.
    """

    z1: float
    z2: float
    S: float = 0.0
    x3d: float = 0.0
    x3d_dot: float = 0.0


@dataclass(frozen=True)
class ControlOutput:
    """One controller evaluation: voltage command plus diagnostics."""

    u: float
    alpha3: float
    coords: ErrorCoords


def error_coords(s: State, y_r: float, g: ControllerGains) -> ErrorCoords:
    """Change of variables z1 = x1 - y_r, z2 = x2 + alpha1*z1."""
    z1 = s.x1 - y_r
    z2 = s.x2 + g.alpha1 * z1
    return ErrorCoords(z1=z1, z2=z2)


def _mu_lower_gap(x1: float, y_r: float, g: ControllerGains, p: PlantParams) -> float:
    arg = x1 + y_r if g.mu_lower_at == "gap_plus_reference" else x1
    return bounds.mu_lower(arg, p)


def virtual_current(z: ErrorCoords, x1: float, y_r: float, g: ControllerGains, p: PlantParams) -> float:
    """Virtual coil current x3d >= 0 [A] demanded by the outer loop.

    ``x3d = sqrt(max(0, -(2m / mu_lo) * alpha2 * z2))``; the clamp covers the
    half-plane where a squared current cannot realize the demand.
    """
    mu_lo = _mu_lower_gap(x1, y_r, g, p)
    x3d_sq = -(2.0 * p.m / mu_lo) * g.alpha2 * z.z2
    return math.sqrt(x3d_sq) if x3d_sq > 0.0 else 0.0


def sliding_gain(s: State, z: ErrorCoords, g: ControllerGains, p: PlantParams) -> float:
    """Switching amplitude alpha3 [V] dominating every admissible plant.

    Sum of worst-case magnitudes of the surface dynamics plus the residual
    margin epsilon1; always >= epsilon1 > 0.
    """
    mu_hi = bounds.mu_bounds(s.x1, p)[1]
    l_hi = bounds.inductance_bounds(s.x1, p)[1]
    eps = (2.0 / p.m) * abs(s.x3 + z.x3d) * mu_hi + g.epsilon1
    return (
        p.R * abs(z.x3d)
        + abs((z.z2 - g.alpha1 * z.z1) * (z.S + z.x3d)) * mu_hi
        + abs(z.x3d_dot) * l_hi
        + eps
    )


class Controller:
    """Stateful controller instance bound to one plant view and gain set.

    Evaluation is a pure function of (state, reference) in ``analytic``
    derivative mode.  In ``filtered`` mode the instance carries the scalar
    state of the dirty-derivative filter, so do not share one instance
    across concurrent simulations.
    """

    def __init__(self, gains: ControllerGains, plant: PlantParams, dt: float | None = None):
        self.gains = gains
        self.plant = plant
        self.dt = dt
        if gains.derivative_mode == "filtered" and (dt is None or dt <= 0.0):
            raise ValueError("filtered derivative mode needs the sampling period dt")
        # Flattened constants for the per-step fast path.
        self._m = plant.m
        self._inv_m = 1.0 / plant.m
        self._lam = plant.lambda_f
        self._spring = plant.K
        self._res = plant.R
        self._n_sq = plant.n_sq
        self._rho_0 = plant.rho_0
        self._mu_num = plant.n_sq * plant.rho_x
        self._rho_hi_slope = bounds.rho_upper_slope(plant)
        self._rho_lo_slope = bounds.rho_lower_slope(plant)
        self._a1 = gains.alpha1
        self._a2 = gains.alpha2
        self._eps1 = gains.epsilon1
        self._shifted_mu_arg = gains.mu_lower_at == "gap_plus_reference"
        self._analytic = gains.derivative_mode == "analytic"
        self._tau_d = gains.derivative_time_constant
        self._phi = gains.boundary_layer
        self.reset()

    def reset(self) -> None:
        """Clear the filtered-derivative state (no-op in analytic mode)."""
        self._prev_x3d: float | None = None
        self._filt = 0.0

    def control(self, s: State, y_r: float) -> ControlOutput:
        u, alpha3, z1, z2, surf, x3d, x3d_dot = self.control_values(s.x1, s.x2, s.x3, y_r)
        return ControlOutput(
            u=u,
            alpha3=alpha3,
            coords=ErrorCoords(z1=z1, z2=z2, S=surf, x3d=x3d, x3d_dot=x3d_dot),
        )

    def control_values(
        self, x1: float, x2: float, x3: float, y_r: float
    ) -> tuple[float, float, float, float, float, float, float]:
        """Fast path: (u, alpha3, z1, z2, S, x3d, x3d_dot) from plain floats."""
        a1 = self._a1
        z1 = x1 - y_r
        z2 = x2 + a1 * z1

        arg = x1 + y_r if self._shifted_mu_arg else x1
        rho_hi_at_arg = self._rho_hi_slope * arg + self._rho_0
        mu_lo = self._mu_num / (rho_hi_at_arg * rho_hi_at_arg)
        x3d_sq = -(2.0 * self._m / mu_lo) * self._a2 * z2
        x3d = math.sqrt(x3d_sq) if x3d_sq > 0.0 else 0.0
        surf = x3 - x3d

        if self._analytic:
            x3d_dot = self._analytic_derivative(x1, x2, z1, z2, arg, mu_lo, x3d, x3d_sq)
        else:
            x3d_dot = self._filtered_derivative(x3d)

        rho_lo = self._rho_lo_slope * x1 + self._rho_0
        mu_hi = self._mu_num / (rho_lo * rho_lo)
        l_hi = self._n_sq / rho_lo
        alpha3 = (
            self._res * x3d
            + abs((z2 - a1 * z1) * (surf + x3d)) * mu_hi
            + abs(x3d_dot) * l_hi
            + 2.0 * self._inv_m * abs(x3 + x3d) * mu_hi
            + self._eps1
        )

        if self._phi > 0.0:
            sat = surf / self._phi
            sat = 1.0 if sat > 1.0 else (-1.0 if sat < -1.0 else sat)
            u = -alpha3 * sat
        else:
            u = -alpha3 if surf > 0.0 else (alpha3 if surf < 0.0 else 0.0)
        return (u, alpha3, z1, z2, surf, x3d, x3d_dot)

    def _analytic_derivative(
        self,
        x1: float,
        x2: float,
        z1: float,
        z2: float,
        arg: float,
        mu_lo: float,
        x3d: float,
        x3d_sq: float,
    ) -> float:
        """Chain-rule derivative of the virtual current through the design model.

        Uses dz1/dt = z2 - alpha1*z1 and the worst-case closed loop for
        dz2/dt (virtual current realized, mu at its lower envelope); defined
        as 0 inside and on the boundary of the clamped region.
        """
        if x3d <= 0.0:
            return 0.0
        f_ext = -self._lam * x2 - self._spring * x1
        z2_dot = (0.5 * x3d_sq * mu_lo + f_ext) * self._inv_m + self._a1 * (z2 - self._a1 * z1)
        # d(mu_lo)/dt at the evaluation gap; the reference is constant
        # between schedule knots so the gap rate is x2 in both modes.
        rho_hi_at_arg = self._rho_hi_slope * arg + self._rho_0
        mu_lo_dot = (-2.0 * self._mu_num * self._rho_hi_slope / rho_hi_at_arg ** 3) * x2
        sq_dot = -(2.0 * self._m * self._a2) * (z2_dot / mu_lo - z2 * mu_lo_dot / (mu_lo * mu_lo))
        return sq_dot / (2.0 * x3d)

    def _filtered_derivative(self, x3d: float) -> float:
        """First-order difference of x3d through a one-pole low-pass filter."""
        raw = 0.0 if self._prev_x3d is None else (x3d - self._prev_x3d) / self.dt
        self._prev_x3d = x3d
        blend = self.dt / (self._tau_d + self.dt)
        self._filt += blend * (raw - self._filt)
        return self._filt


def virtual_current_derivative(
    s: State, z: ErrorCoords, y_r: float, y_r_dot: float, g: ControllerGains, p: PlantParams
) -> float:
    """One-shot analytic derivative of the virtual current [A/s].

    Convenience wrapper over the controller's analytic mode; ``y_r_dot`` is
    accepted for interface completeness but the step references used here
    are piecewise constant, so it must be zero.
    """
    if y_r_dot != 0.0:
        raise ValueError("step references are piecewise constant; y_r_dot must be 0")
    ctrl = Controller(replace(g, derivative_mode="analytic"), p)
    return ctrl.control_values(s.x1, s.x2, s.x3, y_r)[6]


def control_voltage(s: State, y_r: float, g: ControllerGains, p: PlantParams) -> float:
    """Stateless end-to-end evaluation of the switching law u = -alpha3 sign(S)."""
    ctrl = Controller(replace(g, derivative_mode="analytic"), p)
    return ctrl.control_values(s.x1, s.x2, s.x3, y_r)[0]
