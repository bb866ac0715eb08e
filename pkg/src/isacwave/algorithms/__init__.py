"""Waveform design algorithms: single-objective anchors, the scalarized
trade-off solver, and the comparison baselines."""

from .baselines import (
    MSE_MIN_RATE_CONSTRAINED,
    RATE_MAX_MSE_CONSTRAINED,
    soo_baselines,
    weighted_sum_baseline,
)
from .moop import (
    ParetoFront,
    ParetoPoint,
    compute_utopia,
    pareto_sweep,
    solve_moop,
)
from .operators import ScenarioOperators
from .scalarization import (
    ScalarizationWeights,
    Utopia,
    degradation_alpha,
    degradation_terms,
    dominance_filter,
    scalarize_tchebycheff,
    weight_grid,
)
from .soop import (
    IterationTrace,
    RandomizationResult,
    Soop1Result,
    Soop2Result,
    WaveformDesign,
    extract_waveform,
    gaussian_randomization,
    solve_soop1,
    solve_soop2,
)

__all__ = [
    "MSE_MIN_RATE_CONSTRAINED",
    "RATE_MAX_MSE_CONSTRAINED",
    "IterationTrace",
    "ParetoFront",
    "ParetoPoint",
    "RandomizationResult",
    "ScalarizationWeights",
    "ScenarioOperators",
    "Soop1Result",
    "Soop2Result",
    "Utopia",
    "WaveformDesign",
    "compute_utopia",
    "degradation_alpha",
    "degradation_terms",
    "dominance_filter",
    "extract_waveform",
    "gaussian_randomization",
    "pareto_sweep",
    "scalarize_tchebycheff",
    "solve_moop",
    "solve_soop1",
    "solve_soop2",
    "soo_baselines",
    "weight_grid",
    "weighted_sum_baseline",
]
