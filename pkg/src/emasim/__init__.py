"""Uncertain electromagnetic-actuator model, robust controller, and harness."""

from .analysis import RunReport, build_report, overshoot, settling_time, verify_theorem_bounds
from .bounds import EnvelopeTriple, envelopes, inductance_bounds, mu_bounds, rho_bounds
from .controller import (
    Controller,
    ControllerGains,
    ControlOutput,
    ErrorCoords,
    GainCertificate,
    certify_gains,
    control_voltage,
    error_coords,
    sliding_gain,
    virtual_current,
    virtual_current_derivative,
)
from .model import (
    MU_0,
    ConstantSurfaces,
    FringingModel,
    GeometricSurfaces,
    PiecewiseSurfaces,
    PlantParams,
    State,
    SurfaceBounds,
    WeightedSurfaces,
    airgap_surface,
    external_force,
    inductance,
    magnetic_energy,
    magnetic_force,
    mu_coefficient,
    plant_derivative,
    reluctance,
)
from .sim import (
    DivergenceError,
    ReferenceSchedule,
    Scenario,
    SimulationError,
    Trajectory,
    UncertifiedGainsError,
    run,
    sample_fringing,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "MU_0",
    "ConstantSurfaces",
    "ControlOutput",
    "Controller",
    "ControllerGains",
    "DivergenceError",
    "EnvelopeTriple",
    "ErrorCoords",
    "FringingModel",
    "GainCertificate",
    "GeometricSurfaces",
    "PiecewiseSurfaces",
    "PlantParams",
    "ReferenceSchedule",
    "RunReport",
    "Scenario",
    "SimulationError",
    "State",
    "SurfaceBounds",
    "Trajectory",
    "UncertifiedGainsError",
    "WeightedSurfaces",
    "airgap_surface",
    "build_report",
    "certify_gains",
    "control_voltage",
    "envelopes",
    "error_coords",
    "external_force",
    "inductance",
    "inductance_bounds",
    "magnetic_energy",
    "magnetic_force",
    "mu_bounds",
    "mu_coefficient",
    "overshoot",
    "plant_derivative",
    "reluctance",
    "rho_bounds",
    "run",
    "sample_fringing",
    "settling_time",
    "step",
    "verify_theorem_bounds",
    "virtual_current",
    "virtual_current_derivative",
]
