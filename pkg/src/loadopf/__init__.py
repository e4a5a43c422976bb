"""Load-model-aware AC power flow, OPF and load characterization."""

from .exceptions import *  # noqa: F401,F403
from .loads import (
    BIGParams,
    ClassificationReport,
    OperatingVoltage,
    PQParams,
    YParams,
    ZIPParams,
    classify,
    equivalent_admittance,
    evaluate,
    mpt_margin,
)
from .network import AdmittanceMatrix, Branch, Bus, Generator, GridCase, Load, build_admittance, validate_case
from .powerflow import PFOptions, PFSolution, jacobian, residual, solve_pf
from .opf import OPFOptions, OPFSolution, kkt_residual, solve_opf
from .fitting import (
    FitResult,
    MeasurementSample,
    MeasurementSeries,
    Segmentation,
    fit_big,
    fit_pq,
    fit_zip,
    rms_error,
    segment_fit,
)
from .caseio import emit_report, load_case, load_measurements, load_segmented
from .experiments import GapReport, SegmentedCase, SweepReport, experiment_gap, experiment_sweep

__version__ = "0.1.0"
