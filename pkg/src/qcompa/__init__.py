"""Quantization-aware coordinated multicell beamforming for OFDM downlinks.

The main entry points are :func:`run_qcomp_pa` (peak per-antenna power
minimization), the baselines :func:`run_qcomp` and :func:`run_qpercell`, and
the conic reference solver :func:`socp_oracle`.
"""

from .baselines import BaselineResult, run_pa, run_qcomp, run_qpercell
from .dual import DualState, SolverSettings, SolveReport, run_qcomp_pa, solve_fixed_D
from .errors import (
    DegenerateDualityError,
    DelaySpreadError,
    InfeasibleGeometryError,
    InfeasibleTargetError,
    InvalidDimensionError,
    InvalidParameterError,
    InvalidScalingError,
    NoConvergenceError,
    QCompError,
    SingularSystemError,
    UnsupportedResolutionError,
)
from .network import (
    NARROWBAND,
    WIDEBAND,
    ChannelRealization,
    ScenarioParams,
    generate_instance,
    scenario_params,
)
from .primal import BeamformerSet, SqinrPowerReport, evaluate, evaluate_sqinr
from .quantization import QuantizerSpec, quant_gain, quantize
from .socp import socp_oracle
from .system import SystemConfig, db_to_linear, dbm_to_watts, linear_to_db, watts_to_dbm

__version__ = "0.1.0"

__all__ = [
    "BaselineResult",
    "BeamformerSet",
    "ChannelRealization",
    "DegenerateDualityError",
    "DelaySpreadError",
    "DualState",
    "InfeasibleGeometryError",
    "InfeasibleTargetError",
    "InvalidDimensionError",
    "InvalidParameterError",
    "InvalidScalingError",
    "NARROWBAND",
    "NoConvergenceError",
    "QCompError",
    "QuantizerSpec",
    "ScenarioParams",
    "SingularSystemError",
    "SolveReport",
    "SolverSettings",
    "SqinrPowerReport",
    "SystemConfig",
    "UnsupportedResolutionError",
    "WIDEBAND",
    "db_to_linear",
    "dbm_to_watts",
    "evaluate",
    "evaluate_sqinr",
    "generate_instance",
    "linear_to_db",
    "quant_gain",
    "quantize",
    "run_pa",
    "run_qcomp",
    "run_qcomp_pa",
    "run_qpercell",
    "scenario_params",
    "socp_oracle",
    "solve_fixed_D",
    "watts_to_dbm",
]
