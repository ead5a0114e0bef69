"""Post-hoc metrics and guarantee checks over simulated trajectories.

Step-response metrics (settling, overshoot, steady-state error), sliding
surface reaching statistics, ultimate-boundedness containment against the
certified disc radius, and a numerical check of the certified decay rate of
the outer-loop storage function.  Everything here is a pure function over an
immutable trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .controller import Controller, GainCertificate
from .model import PlantParams, make_rate_fn
from .sim import Trajectory

# Reaching is declared once |S| stays under the threshold this long [s].
REACHING_HOLD = 1.0e-3
# Fraction of the virtual-current peak used as the default |S| threshold.
S_TOL_FRACTION = 0.01
# Relative slack on the decay-rate inequality (discretization headroom).
DECAY_RTOL = 0.05


@dataclass
class RunReport:
    """Summary of one closed-loop run.

    Fractions are relative: overshoot to the commanded step size,
    steady-state error to the final reference.  ``settling_time`` is NaN and
    ``settled`` False when the band is never held; containment and decay
    checks then cover the whole run.
    """

    settling_time: float
    settled: bool
    overshoot: float
    steady_state_error: float
    max_abs_u: float
    reaching_time: float
    reached: bool
    s_tol: float
    ultimate_bound_ok: bool
    radius_used: float
    radius_extreme: float
    contained_in_extreme_radius: bool
    max_error_norm_after_settling: float
    lyapunov_violations: int
    lyapunov_checked_samples: int
    min_u_sign_changes_per_ms: int
    x1_trend_sign_changes: int
    x2_trend_sign_changes: int
    final_reference: float
    final_position: float
    duration: float

    def to_text(self) -> str:
        lines = ["run report"]
        for f in fields(self):
            lines.append(f"  {f.name} = {getattr(self, f.name)!r}")
        return "\n".join(lines) + "\n"


def _final_reference(traj: Trajectory) -> float:
    if traj.reference is not None:
        return traj.reference.final()
    raise ValueError("trajectory carries no reference schedule")


def settling_time(traj: Trajectory, band: float = 0.02) -> float | None:
    """First time after which x1 stays within ``band`` of the final reference.

    The band is a fraction of the final reference value (absolute band
    ``band * |y_r|``).  Returns None when the trajectory never stays inside.
    """
    if len(traj) == 0:
        return None
    y_r = _final_reference(traj)
    tol = band * abs(y_r) if y_r != 0.0 else band
    outside = np.abs(traj.x1 - y_r) > tol
    if not outside.any():
        return 0.0
    last_out = int(np.flatnonzero(outside)[-1])
    if last_out + 1 >= len(traj):
        return None
    return float(traj.t[last_out + 1])


def overshoot(traj: Trajectory) -> float:
    """Peak excursion past the final reference, relative to the step size.

    The step size is the distance from the initial position to the final
    reference; a monotone approach from below scores exactly zero.
    """
    if len(traj) == 0:
        return 0.0
    y_r = _final_reference(traj)
    step = abs(y_r - traj.x1[0])
    if step == 0.0:
        step = abs(y_r) if y_r != 0.0 else 1.0
    upward = y_r >= traj.x1[0]
    peak = float(np.max(traj.x1)) if upward else float(np.min(traj.x1))
    return max(0.0, (peak - y_r) / step) if upward else max(0.0, (y_r - peak) / step)


def steady_state_error(traj: Trajectory, tail: int = 10) -> float:
    """|x1 - y_r| / |y_r| averaged over the last ``tail`` samples."""
    if len(traj) == 0:
        return math.nan
    y_r = _final_reference(traj)
    x_end = float(np.mean(traj.x1[-tail:]))
    scale = abs(y_r) if y_r != 0.0 else 1.0
    return abs(x_end - y_r) / scale


def default_s_tol(traj: Trajectory) -> float:
    """Reaching threshold: 1% of the virtual-current peak over the run [A]."""
    if len(traj) == 0 or float(np.max(np.abs(traj.x3d))) == 0.0:
        return S_TOL_FRACTION
    return S_TOL_FRACTION * float(np.max(np.abs(traj.x3d)))


def reaching_time(traj: Trajectory, s_tol: float | None = None) -> float | None:
    """First time |S| stays below the threshold for :data:`REACHING_HOLD`.

    Returns None when the surface is never held that long.
    """
    if len(traj) == 0:
        return None
    if s_tol is None:
        s_tol = default_s_tol(traj)
    below = np.abs(traj.S) <= s_tol
    hold = max(1, int(round(REACHING_HOLD / traj.sample_dt)))
    run_len = 0
    for i, ok in enumerate(below):
        run_len = run_len + 1 if ok else 0
        if run_len >= hold:
            return float(traj.t[i - hold + 1])
    return None


def sliding_surface_decay(
    traj: Trajectory, plant: PlantParams, cert: GainCertificate
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample d(S^2/2)/dt against the true plant, and the reaching target.

    Recomputes the current equation of the realized plant at each logged
    sample (with the held voltage) and the controller's virtual-current
    derivative, giving ``S * dS/dt`` analytically rather than by differencing
    the chattering record.  The reaching law demands values at or below
    ``-epsilon1 * |S|``.
    """
    rate = make_rate_fn(plant)
    x3d_dot = traj.x3d_dot
    if x3d_dot is None:
        ctrl = Controller(cert.gains, plant)
        x3d_dot = np.asarray(
            [
                ctrl.control_values(traj.x1[i], traj.x2[i], traj.x3[i], traj.reference_at(traj.t[i]))[6]
                for i in range(len(traj))
            ]
        )
    x3_dot = np.asarray(
        [
            rate(traj.x1[i], traj.x2[i], traj.x3[i], traj.u[i])[2]
            for i in range(len(traj))
        ]
    )
    s_dot_s = traj.S * (x3_dot - x3d_dot)
    target = -cert.gains.epsilon1 * np.abs(traj.S)
    return s_dot_s, target


def reaching_fraction(
    traj: Trajectory,
    plant: PlantParams,
    cert: GainCertificate,
    s_tol: float | None = None,
    rtol: float = DECAY_RTOL,
) -> tuple[float, int]:
    """Fraction of samples with |S| above threshold satisfying the reaching law.

    Satisfaction means ``S * dS/dt <= -(1 - rtol) * epsilon1 * |S|``.
    Returns (fraction, number of samples checked); fraction is 1.0 when no
    sample exceeds the threshold.
    """
    if s_tol is None:
        s_tol = default_s_tol(traj)
    s_dot_s, target = sliding_surface_decay(traj, plant, cert)
    mask = np.abs(traj.S) > s_tol
    checked = int(mask.sum())
    if checked == 0:
        return 1.0, 0
    ok = s_dot_s[mask] <= (1.0 - rtol) * target[mask]
    return float(np.mean(ok)), checked


def trend_sign_changes(values: np.ndarray, window: int) -> int:
    """Sign flips of the net change across consecutive non-overlapping windows.

    A smooth approach shows zero flips; a signal chattering at the window
    scale alternates nearly every window.  Windows with exactly zero net
    change are skipped.
    """
    values = np.asarray(values, dtype=float)
    n_windows = len(values) // window
    if n_windows < 2:
        return 0
    deltas = [values[(k + 1) * window - 1] - values[k * window] for k in range(n_windows)]
    signs = [math.copysign(1.0, d) for d in deltas if d != 0.0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def chattering_window_samples(traj: Trajectory, window_seconds: float = 5.0e-3) -> int:
    return max(2, int(round(window_seconds / traj.sample_dt)))


def verify_theorem_bounds(
    traj: Trajectory, cert: GainCertificate, p: PlantParams
) -> dict[str, object]:
    """Check the closed-loop guarantees along a trajectory.

    (i) reaching: |S| under its threshold from the reaching time to the end;
    (ii) containment: ||(z1, z2)|| within the certified radius after
    settling (whole run if the trajectory never settles);
    (iii) decay: the central-difference derivative of V1 at most
    ``-(1 - theta) * alpha * ||z||^2`` (with 5% slack) wherever ``||z||``
    exceeds the radius.

    Containment is also evaluated against the smaller radius obtained from
    the most negative eigenvalue; by construction that disc lies inside the
    certified one, so containment there implies containment here.  Results
    are reported, never raised, so mis-gained negative controls can be
    studied.
    """
    out: dict[str, object] = {
        "radius_used": cert.radius,
        "radius_extreme": cert.radius_extreme,
    }
    if len(traj) == 0:
        out.update(
            reached=False,
            reaching_time=math.nan,
            s_tol=math.nan,
            ultimate_bound_ok=False,
            contained_in_extreme_radius=False,
            max_error_norm_after_settling=math.nan,
            lyapunov_violations=0,
            lyapunov_checked_samples=0,
        )
        return out

    s_tol = default_s_tol(traj)
    t_reach = reaching_time(traj, s_tol)
    reached = t_reach is not None
    if reached:
        after = traj.t >= t_reach
        reached = bool(np.all(np.abs(traj.S[after]) <= s_tol * (1.0 + 1e-9)))
    out.update(reached=reached, reaching_time=t_reach if t_reach is not None else math.nan, s_tol=s_tol)

    z_norm = np.hypot(traj.z1, traj.z2)
    t_settle = settling_time(traj)
    start = 0.0 if t_settle is None else t_settle
    post = traj.t >= start
    post_norm = z_norm[post]
    max_norm = float(np.max(post_norm)) if post_norm.size else math.nan
    out["max_error_norm_after_settling"] = max_norm
    finite_radius = math.isfinite(cert.radius)
    out["ultimate_bound_ok"] = bool(finite_radius and post_norm.size and max_norm <= cert.radius)
    out["contained_in_extreme_radius"] = bool(
        math.isfinite(cert.radius_extreme) and post_norm.size and max_norm <= cert.radius_extreme
    )

    violations = 0
    checked = 0
    if finite_radius and len(traj) >= 3:
        dt_s = traj.sample_dt
        v1 = traj.V1
        v1_dot = (v1[2:] - v1[:-2]) / (2.0 * dt_s)
        norm_sq = z_norm[1:-1] ** 2
        required = -(1.0 - cert.gains.theta) * cert.alpha * norm_sq
        mask = z_norm[1:-1] > cert.radius
        checked = int(mask.sum())
        if checked:
            slack = DECAY_RTOL * np.abs(required[mask])
            violations = int(np.sum(v1_dot[mask] > required[mask] + slack))
    out["lyapunov_violations"] = violations
    out["lyapunov_checked_samples"] = checked
    return out


def build_report(traj: Trajectory, cert: GainCertificate, p: PlantParams) -> RunReport:
    """Assemble the full :class:`RunReport` for one run."""
    checks = verify_theorem_bounds(traj, cert, p)
    t_settle = settling_time(traj)
    settled = t_settle is not None
    window = chattering_window_samples(traj) if len(traj) else 2
    if settled and len(traj):
        post = traj.t >= t_settle
        x1_trend = trend_sign_changes(traj.x1[post], window)
        x2_trend = trend_sign_changes(traj.x2[post], window)
    else:
        x1_trend = x2_trend = 0

    min_changes = 0
    if traj.u_sign_changes_per_ms is not None and traj.u_sign_changes_per_ms.size:
        counts = traj.u_sign_changes_per_ms
        t_reach = checks["reaching_time"]
        skip = 0
        if isinstance(t_reach, float) and math.isfinite(t_reach):
            skip = int(math.ceil((t_reach + REACHING_HOLD) / 1.0e-3))
        tail = counts[skip:]
        min_changes = int(tail.min()) if tail.size else 0

    return RunReport(
        settling_time=t_settle if settled else math.nan,
        settled=settled,
        overshoot=overshoot(traj),
        steady_state_error=steady_state_error(traj),
        max_abs_u=float(np.max(np.abs(traj.u))) if len(traj) else 0.0,
        reaching_time=checks["reaching_time"],
        reached=bool(checks["reached"]),
        s_tol=checks["s_tol"],
        ultimate_bound_ok=bool(checks["ultimate_bound_ok"]),
        radius_used=float(checks["radius_used"]),
        radius_extreme=float(checks["radius_extreme"]),
        contained_in_extreme_radius=bool(checks["contained_in_extreme_radius"]),
        max_error_norm_after_settling=float(checks["max_error_norm_after_settling"]),
        lyapunov_violations=int(checks["lyapunov_violations"]),
        lyapunov_checked_samples=int(checks["lyapunov_checked_samples"]),
        min_u_sign_changes_per_ms=min_changes,
        x1_trend_sign_changes=x1_trend,
        x2_trend_sign_changes=x2_trend,
        final_reference=_final_reference(traj) if len(traj) else math.nan,
        final_position=float(traj.x1[-1]) if len(traj) else math.nan,
        duration=float(traj.t[-1]) + traj.sample_dt if len(traj) else 0.0,
    )
