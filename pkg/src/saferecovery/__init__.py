"""Safe recovery of a CBF-controlled LTI plant under sensor denial-of-service.

A switching Luenberger observer drops the vulnerable outputs while they are
blocked; exponential envelopes on the estimation error certify which attack
schedules the estimate recovers from; a barrier QP on the estimate keeps the
true state inside a quadratic safe set.  The closed loop runs on a compiled
kernel when available and on a NumPy fallback otherwise.
"""

from .attacks import AttackSchedule, AttackScheduleError, AttackSignalPolicy, worst_case_schedule
from .certificates import (
    AttackGrowthCert,
    CertificateError,
    NominalDecayCert,
    RecoveryCertificate,
    build_attack_cert,
    build_nominal_cert,
    certify,
    gamma1,
    gamma2,
    max_attack_duration,
    min_recovery_time,
)
from .controller import ControllerConfig, QpSolution, lqr_reference_gain, solve_cbf_qp
from .kernel import BACKEND, available_backends
from .observer import ObserverGains, design_attack_gain, design_nominal_gain
from .plant import LtiPlant, check_structural_assumptions
from .scenario import DesignError, Scenario, ScenarioError, build, load_scenario, parse_scenario
from .sets import QuadraticSet, SetFamily
from .simulation import (
    SafetyReport,
    ScenarioConfig,
    SimulationError,
    TrajectoryLog,
    monitor,
    monte_carlo_validate,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "AttackSchedule", "AttackScheduleError", "AttackSignalPolicy", "worst_case_schedule",
    "AttackGrowthCert", "CertificateError", "NominalDecayCert", "RecoveryCertificate",
    "build_attack_cert", "build_nominal_cert", "certify", "gamma1", "gamma2",
    "max_attack_duration", "min_recovery_time",
    "ControllerConfig", "QpSolution", "lqr_reference_gain", "solve_cbf_qp",
    "BACKEND", "available_backends",
    "ObserverGains", "design_attack_gain", "design_nominal_gain",
    "LtiPlant", "check_structural_assumptions",
    "DesignError", "Scenario", "ScenarioError", "build", "load_scenario", "parse_scenario",
    "QuadraticSet", "SetFamily",
    "SafetyReport", "ScenarioConfig", "SimulationError", "TrajectoryLog", "monitor",
    "monte_carlo_validate", "simulate",
]
