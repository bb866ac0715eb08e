"""Waveform design for joint radar sensing and multi-user communication."""

from .algorithms import (
    ParetoFront,
    ParetoPoint,
    ScalarizationWeights,
    ScenarioOperators,
    Soop1Result,
    Soop2Result,
    Utopia,
    WaveformDesign,
    compute_utopia,
    dominance_filter,
    extract_waveform,
    pareto_sweep,
    solve_moop,
    solve_soop1,
    solve_soop2,
    soo_baselines,
    weight_grid,
    weighted_sum_baseline,
)
from .convex import ConvexProblem, SolverConfig, Status, solve
from .metrics import WaveformReport, evaluate_waveform
from .model import ScenarioDraw, SystemConfig, draw_scenario, trial_generator

__version__ = "0.1.0"

__all__ = [
    "ConvexProblem",
    "ParetoFront",
    "ParetoPoint",
    "ScalarizationWeights",
    "ScenarioDraw",
    "ScenarioOperators",
    "SolverConfig",
    "Soop1Result",
    "Soop2Result",
    "Status",
    "SystemConfig",
    "Utopia",
    "WaveformDesign",
    "WaveformReport",
    "__version__",
    "compute_utopia",
    "dominance_filter",
    "draw_scenario",
    "evaluate_waveform",
    "extract_waveform",
    "pareto_sweep",
    "solve",
    "solve_moop",
    "solve_soop1",
    "solve_soop2",
    "soo_baselines",
    "trial_generator",
    "weight_grid",
    "weighted_sum_baseline",
]
