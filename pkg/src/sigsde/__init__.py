"""Parameter estimation for linear signature SDEs by expected signature matching."""
from ._backend import backend_name
from .driving_moments import expected_signature_bm_time, mc_expected_signature
from .estimator import (
    EstimationConfig,
    EstimationReport,
    SolverConfig,
    assemble_system,
    empirical_moments,
    nonident_demo,
    run_experiment,
    select_estimate,
    solve_system,
)
from .mpoly import MPoly, PolySystem
from .picard_poly import PicardPolynomials, alpha, moment_poly, numeric_picard, q_bound
from .sde_model import Theta, eval_F, heun_step, midpoint_step, simulate, simulate_batch
from .shuffle_algebra import (
    TruncTensor,
    concat_mul,
    enumerate_words,
    format_word,
    parse_word,
    shuffle,
    trunc_exp,
)
from .signatures import (
    PiecewiseLinearPath,
    augment_time,
    path_signature,
    segment_signature,
)

__version__ = "0.1.0"

__all__ = [
    "backend_name",
    "expected_signature_bm_time",
    "mc_expected_signature",
    "EstimationConfig",
    "EstimationReport",
    "SolverConfig",
    "assemble_system",
    "empirical_moments",
    "nonident_demo",
    "run_experiment",
    "select_estimate",
    "solve_system",
    "MPoly",
    "PolySystem",
    "PicardPolynomials",
    "alpha",
    "moment_poly",
    "numeric_picard",
    "q_bound",
    "Theta",
    "eval_F",
    "heun_step",
    "midpoint_step",
    "simulate",
    "simulate_batch",
    "TruncTensor",
    "concat_mul",
    "enumerate_words",
    "format_word",
    "parse_word",
    "shuffle",
    "trunc_exp",
    "PiecewiseLinearPath",
    "augment_time",
    "path_signature",
    "segment_signature",
]
