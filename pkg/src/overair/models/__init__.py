from .analysis import (
    BoundConstants,
    BoundMode,
    Interval,
    LaplacianSet,
    MetricsTrace,
    MomentCheck,
    MomentReport,
    RealizedLaplacian,
)
from .channel import ChannelModel, RoundBatch, RoundDraw, SignalBreakdown, parse_power
from .protocol import (
    ExplicitSchedule,
    NegativityPolicy,
    NoiseDecomposition,
    PerAgentSchedule,
    PowerLawSchedule,
    ProtocolKind,
    ScheduleVerdict,
    StateVector,
    StepsizeSchedule,
    ValidationMode,
)
from .report import (
    CheckResult,
    CompareReport,
    ConnectivityReport,
    EventTotals,
    FinalMeanSummary,
    RunReport,
    SignTest,
    ValidationReport,
)
from .scenario import InitialSpec, MomentsSpec, OutputSpec, Scenario, TopologySpec, TrialResult
from .topology import (
    ConnectivityCertificate,
    GeneratorKind,
    PhysicalTopology,
    TopologyEvent,
    TopologySequence,
)

__all__ = [
    "BoundConstants",
    "BoundMode",
    "ChannelModel",
    "CheckResult",
    "CompareReport",
    "ConnectivityCertificate",
    "ConnectivityReport",
    "EventTotals",
    "ExplicitSchedule",
    "FinalMeanSummary",
    "GeneratorKind",
    "InitialSpec",
    "Interval",
    "LaplacianSet",
    "MetricsTrace",
    "MomentCheck",
    "MomentReport",
    "MomentsSpec",
    "NegativityPolicy",
    "NoiseDecomposition",
    "OutputSpec",
    "PerAgentSchedule",
    "PhysicalTopology",
    "PowerLawSchedule",
    "ProtocolKind",
    "RealizedLaplacian",
    "RoundBatch",
    "RoundDraw",
    "RunReport",
    "Scenario",
    "ScheduleVerdict",
    "SignTest",
    "SignalBreakdown",
    "StateVector",
    "StepsizeSchedule",
    "TopologyEvent",
    "TopologySequence",
    "TopologySpec",
    "TrialResult",
    "ValidationReport",
    "ValidationMode",
    "parse_power",
]
