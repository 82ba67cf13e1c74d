"""Monte Carlo reproductions of the worked examples, the covering/packing checks and the auxiliary sweeps."""

from mdlab.experiments.common import (
    CodeSearchError,
    ExperimentConfig,
    ExperimentError,
    ExperimentReport,
    frequency_half_width,
    mean_half_width,
    run_trials,
    setup_rng,
    trial_rng,
)
from mdlab.experiments.figd import FigdResult, figd_sweep, objective, objective_batch, x3_law
from mdlab.experiments.lemmas import (
    EnumerationCapExceeded,
    LinearBinning,
    covering_bounds,
    covering_mc,
    diagonal_pmf,
    dropped_packing_slack,
    packing_bounds,
    packing_mc,
    pattern_pmf,
    random_linear_binning,
)
from mdlab.experiments.scalar import run_scalar
from mdlab.experiments.vecbin import run_vecbin
from mdlab.experiments.vecsource import run_vecsource
from mdlab.experiments.zb import ZbWitness, degenerate_systems, target_vector, zb_witness_search

__all__ = [
    "CodeSearchError",
    "EnumerationCapExceeded",
    "ExperimentConfig",
    "ExperimentError",
    "ExperimentReport",
    "FigdResult",
    "LinearBinning",
    "ZbWitness",
    "covering_bounds",
    "covering_mc",
    "degenerate_systems",
    "diagonal_pmf",
    "dropped_packing_slack",
    "figd_sweep",
    "frequency_half_width",
    "mean_half_width",
    "objective",
    "objective_batch",
    "packing_bounds",
    "packing_mc",
    "pattern_pmf",
    "random_linear_binning",
    "run_scalar",
    "run_trials",
    "run_vecbin",
    "run_vecsource",
    "setup_rng",
    "target_vector",
    "trial_rng",
    "x3_law",
    "zb_witness_search",
]
