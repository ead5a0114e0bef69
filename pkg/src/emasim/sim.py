"""Fixed-step closed-loop simulation of the actuator.

The switching control law makes the right-hand side discontinuous, so the
loop uses a small fixed step with zero-order-hold control (RK4 by default;
explicit Euler available).  Adaptive solvers stall on the chattering and
gain nothing: accuracy at the sliding surface is first order regardless of
the scheme, which is why the default step is small (1 us).

Runs are deterministic: an identical :class:`Scenario` (including the seed
used for fringing realizations) reproduces the trajectory bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .controller import Controller, ControllerGains, GainCertificate, certify_gains
from .model import (
    FringingModel,
    PiecewiseSurfaces,
    PlantParams,
    State,
    SurfaceBounds,
    make_rate_fn,
)

INTEGRATORS = ("rk4", "euler")


class SimulationError(RuntimeError):
    """Base class for simulation failures."""


class DivergenceError(SimulationError):
    """The state left the finite range; carries the failing time [s]."""

    def __init__(self, time: float):
        super().__init__(f"simulation diverged at t = {time:.9g} s")
        self.time = time


class UncertifiedGainsError(SimulationError):
    """Gains failed certification and the override flag is not set."""


@dataclass(frozen=True)
class ReferenceSchedule:
    """Piecewise-constant position reference: ((t0, y0), (t1, y1), ...).

    Times must be strictly increasing and start at 0; the reference holds
    each value until the next knot.  Step references mean the reference rate
    is zero away from the knots.
    """

    knots: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.knots:
            raise ValueError("reference schedule needs at least one knot")
        times = [t for t, _ in self.knots]
        if times[0] != 0.0:
            raise ValueError("reference schedule must start at t = 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("reference times must be strictly increasing")
        for t, y in self.knots:
            if not (math.isfinite(t) and math.isfinite(y)):
                raise ValueError("reference knots must be finite")

    @staticmethod
    def step(value: float) -> "ReferenceSchedule":
        """A single step applied at t = 0."""
        return ReferenceSchedule(((0.0, value),))

    def value(self, t: float) -> float:
        y = self.knots[0][1]
        for knot_t, knot_y in self.knots:
            if t >= knot_t:
                y = knot_y
            else:
                break
        return y

    def final(self) -> float:
        return self.knots[-1][1]

    def max_abs(self) -> float:
        return max(abs(y) for _, y in self.knots)


@dataclass(frozen=True)
class Scenario:
    """Everything one closed-loop run depends on."""

    plant: PlantParams
    gains: ControllerGains
    reference: ReferenceSchedule
    dt: float = 1.0e-6
    duration: float = 0.5
    integrator: str = "rk4"
    decimation: int = 100
    control_period: int = 1  # controller updates every N integration steps
    seed: int = 0
    allow_uncertified: bool = False

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.duration < 0.0:
            raise ValueError("duration must be non-negative")
        if self.duration and self.duration < self.dt:
            raise ValueError("duration must be at least one step (or zero)")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.decimation < 1 or self.control_period < 1:
            raise ValueError("decimation and control_period must be >= 1")


_CSV_COLUMNS = ("t", "x1", "x2", "x3", "u", "x3d", "S", "z1", "z2", "V1", "V2", "V", "alpha3")


@dataclass
class Trajectory:
    """Decimated closed-loop record, one row per logged step.

    The CSV serialization carries exactly the columns ``t, x1, x2, x3, u,
    x3d, S, z1, z2, V1, V2, V, alpha3``; ``x3d_dot`` and the per-millisecond
    switching counts are extra in-memory channels used by the analysis.
    """

    t: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    u: np.ndarray
    x3d: np.ndarray
    S: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    V: np.ndarray
    alpha3: np.ndarray
    dt: float
    decimation: int
    reference: ReferenceSchedule | None = None
    x3d_dot: np.ndarray | None = None
    u_sign_changes_per_ms: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.t)

    @property
    def sample_dt(self) -> float:
        """Spacing between logged rows [s]."""
        return self.dt * self.decimation

    def reference_at(self, t: float) -> float:
        if self.reference is None:
            raise ValueError("trajectory carries no reference schedule")
        return self.reference.value(t)

    def to_csv(self, path) -> None:
        """Write the pinned column set; floats as shortest round-trip reprs."""
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(",".join(_CSV_COLUMNS) + "\n")
            cols = [getattr(self, name) for name in _CSV_COLUMNS]
            for row in zip(*cols):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path, reference: ReferenceSchedule | None = None) -> "Trajectory":
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline().strip()
            if header.split(",") != list(_CSV_COLUMNS):
                raise ValueError(f"unexpected trajectory header: {header!r}")
            rows = [line.split(",") for line in fh if line.strip()]
        data = np.asarray(rows, dtype=float) if rows else np.empty((0, len(_CSV_COLUMNS)))
        cols = {name: data[:, i] for i, name in enumerate(_CSV_COLUMNS)}
        dt = float(cols["t"][1] - cols["t"][0]) if len(data) > 1 else 0.0
        return cls(**cols, dt=dt, decimation=1, reference=reference)


def _euler(rate, x1, x2, x3, u, dt):
    d1, d2, d3 = rate(x1, x2, x3, u)
    return x1 + dt * d1, x2 + dt * d2, x3 + dt * d3


def _rk4(rate, x1, x2, x3, u, dt):
    half = 0.5 * dt
    a1, a2, a3 = rate(x1, x2, x3, u)
    b1, b2, b3 = rate(x1 + half * a1, x2 + half * a2, x3 + half * a3, u)
    c1, c2, c3 = rate(x1 + half * b1, x2 + half * b2, x3 + half * b3, u)
    d1, d2, d3 = rate(x1 + dt * c1, x2 + dt * c2, x3 + dt * c3, u)
    sixth = dt / 6.0
    return (
        x1 + sixth * (a1 + 2.0 * (b1 + c1) + d1),
        x2 + sixth * (a2 + 2.0 * (b2 + c2) + d2),
        x3 + sixth * (a3 + 2.0 * (b3 + c3) + d3),
    )


def step(s: State, t: float, scen: Scenario) -> State:
    """Advance one fixed step from state ``s`` at time ``t``.

    The control voltage is evaluated once at the step start and held across
    the step (zero-order hold).  Convenience wrapper for tests and
    single-step inspection; :func:`run` integrates whole scenarios.
    """
    controller = Controller(scen.gains, scen.plant, dt=scen.dt)
    rate = make_rate_fn(scen.plant)
    u = controller.control_values(s.x1, s.x2, s.x3, scen.reference.value(t))[0]
    stepper = _rk4 if scen.integrator == "rk4" else _euler
    x1, x2, x3 = stepper(rate, s.x1, s.x2, s.x3, u, scen.dt)
    if scen.plant.hard_stop and x1 < 0.0:
        x1, x2 = 0.0, 0.0
    if not (math.isfinite(x1) and math.isfinite(x2) and math.isfinite(x3)):
        raise DivergenceError(t + scen.dt)
    return State(x1, x2, x3)


def run(scen: Scenario, certificate: GainCertificate | None = None) -> Trajectory:
    """Integrate the closed loop over the whole scenario.

    Refuses to run uncertified gains unless ``scen.allow_uncertified`` is
    set.  Raises :class:`DivergenceError` if the state leaves the finite
    range.  Rows are logged at the start of every ``decimation``-th step, so
    row k sits at ``t = k * decimation * dt``.
    """
    if certificate is None:
        certificate = certify_gains(scen.gains, scen.plant, scen.reference.max_abs())
    if not certificate.certified and not scen.allow_uncertified:
        raise UncertifiedGainsError(
            "gain certificate failed (design matrix not negative definite); "
            "set allow_uncertified / --force to run anyway"
        )

    plant = scen.plant
    controller = Controller(scen.gains, plant, dt=scen.dt)
    rate = make_rate_fn(plant)
    stepper = _rk4 if scen.integrator == "rk4" else _euler

    dt = scen.dt
    n_steps = int(round(scen.duration / dt)) if scen.duration > 0.0 else 0
    decimation = scen.decimation
    control_period = scen.control_period
    hard_stop = plant.hard_stop
    alpha1 = scen.gains.alpha1

    knots = list(scen.reference.knots)
    knot_idx = 0
    y_r = knots[0][1]

    x1, x2, x3 = plant.x0.as_tuple()
    u = x3d = x3d_dot = surf = alpha3 = 0.0

    rows: list[tuple] = []
    ms_steps = max(1, int(round(1.0e-3 / dt)))
    sign_counts: list[int] = []
    ms_count = 0
    prev_sign = 0

    for i in range(n_steps):
        t = i * dt
        while knot_idx + 1 < len(knots) and t >= knots[knot_idx + 1][0]:
            knot_idx += 1
            y_r = knots[knot_idx][1]

        if i % control_period == 0:
            u, alpha3, _, _, surf, x3d, x3d_dot = controller.control_values(x1, x2, x3, y_r)

        if i % decimation == 0:
            z1 = x1 - y_r
            z2 = x2 + alpha1 * z1
            s_now = x3 - x3d
            v1 = 0.5 * (z1 * z1 + z2 * z2)
            v2 = 0.5 * s_now * s_now
            rows.append((t, x1, x2, x3, u, x3d, s_now, z1, z2, v1, v2, v1 + v2, alpha3, x3d_dot))

        sign = 1 if u > 0.0 else (-1 if u < 0.0 else 0)
        if sign != 0:
            if prev_sign != 0 and sign != prev_sign:
                ms_count += 1
            prev_sign = sign
        if (i + 1) % ms_steps == 0:
            sign_counts.append(ms_count)
            ms_count = 0

        x1, x2, x3 = stepper(rate, x1, x2, x3, u, dt)
        if hard_stop and x1 < 0.0:
            x1, x2 = 0.0, 0.0
        if not (math.isfinite(x1) and math.isfinite(x2) and math.isfinite(x3)):
            raise DivergenceError(t + dt)

    data = np.asarray(rows, dtype=float) if rows else np.empty((0, 14))
    return Trajectory(
        t=data[:, 0],
        x1=data[:, 1],
        x2=data[:, 2],
        x3=data[:, 3],
        u=data[:, 4],
        x3d=data[:, 5],
        S=data[:, 6],
        z1=data[:, 7],
        z2=data[:, 8],
        V1=data[:, 9],
        V2=data[:, 10],
        V=data[:, 11],
        alpha3=data[:, 12],
        x3d_dot=data[:, 13],
        dt=dt,
        decimation=decimation,
        reference=scen.reference,
        u_sign_changes_per_ms=np.asarray(sign_counts, dtype=np.int64),
    )


def integrate_open_loop(
    plant: PlantParams,
    u_of_t: Callable[[float], float] | float,
    dt: float,
    duration: float,
    integrator: str = "rk4",
    decimation: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Open-loop fixed-step integration; returns (times, states[n, 3]).

    ``u_of_t`` may be a constant or a callable of time, held per step.  Used
    by oracle tests (free oscillations, convergence-order checks) and for
    plant exploration without a controller.
    """
    if integrator not in INTEGRATORS:
        raise ValueError(f"integrator must be one of {INTEGRATORS}")
    rate = make_rate_fn(plant)
    stepper = _rk4 if integrator == "rk4" else _euler
    u_fn = u_of_t if callable(u_of_t) else (lambda _t: u_of_t)
    x1, x2, x3 = plant.x0.as_tuple()
    n_steps = int(round(duration / dt))
    times, states = [], []
    for i in range(n_steps):
        t = i * dt
        if i % decimation == 0:
            times.append(t)
            states.append((x1, x2, x3))
        x1, x2, x3 = stepper(rate, x1, x2, x3, u_fn(t), dt)
        if plant.hard_stop and x1 < 0.0:
            x1, x2 = 0.0, 0.0
        if not (math.isfinite(x1) and math.isfinite(x2) and math.isfinite(x3)):
            raise DivergenceError(t + dt)
    times.append(n_steps * dt)
    states.append((x1, x2, x3))
    return np.asarray(times), np.asarray(states)


def sample_fringing(
    seed: int,
    bounds: SurfaceBounds,
    n: int,
    stroke: float = 6.0e-3,
    knot_count: int = 9,
    slope_safety: float = 0.5,
) -> list[FringingModel]:
    """Draw ``n`` admissible fringing realizations inside the surface band.

    Each realization is a piecewise-linear surface pair on ``knot_count``
    equally spaced knots over [0, stroke].  Knot-to-knot slopes are capped
    so the realized gap reluctance stays increasing and the realized mu
    stays inside its envelope; ``slope_safety`` scales the cap.  Fixed seed
    gives bit-identical realizations.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if knot_count < 2:
        raise ValueError("knot_count must be >= 2")
    rng = np.random.default_rng(seed)
    knots = tuple(float(x) for x in np.linspace(0.0, stroke, knot_count))
    seg = knots[1] - knots[0]
    out: list[FringingModel] = []
    for _ in range(n):
        tables = {}
        for gap in (1, 3):
            lo, hi = bounds.lower(gap), bounds.upper(gap)
            width = hi - lo
            if width == 0.0:
                tables[gap] = tuple([lo] * knot_count)
                continue
            # Max fractional change per knot spacing keeping x1*dS/dx1 < S.
            max_dw = slope_safety * (lo / (stroke * width)) * seg
            w = rng.uniform(0.05, 0.95)
            values = [lo + w * width]
            for _k in range(knot_count - 1):
                w = min(0.95, max(0.05, w + rng.uniform(-max_dw, max_dw)))
                values.append(lo + w * width)
            tables[gap] = tuple(values)
        out.append(
            PiecewiseSurfaces(
                knots=knots,
                s1_values=tables[1],
                s3_values=tables[3],
                bounds=bounds,
                stroke=stroke,
            )
        )
    return out
