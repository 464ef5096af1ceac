"""Community detection in annotated networks.

Degree-corrected block models whose community priors are learned
functions of per-node metadata, fitted by belief-propagation EM.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .bp import Marginals, Messages, exact_marginals, init_messages, run_bp
from .em import (FitConfig, FitResult, bethe_log_likelihood, fit,
                 m_step_theta, predict_from_metadata)
from .graph import (Graph, MetadataColumn, constant_column, discrete_column,
                    from_edges, load_edge_list, load_metadata, ordered_column,
                    write_edge_list, write_metadata)
from .metrics import conditional_entropy_model, fraction_correct, nmi
from .priors import (BernsteinPrior, BlockAffinity, DiscretePrior,
                     bernstein_basis, eval_prior, m_step_gamma_discrete,
                     m_step_gamma_ordered, prior_matrix)
from .synth import (PlantedInstance, benchmark_fig1a, benchmark_fig1b,
                    detectability_threshold, generate_metadata, generate_sbm,
                    make_instance)

__all__ = [
    "BACKEND", "__version__",
    "Graph", "MetadataColumn", "Marginals", "Messages",
    "BlockAffinity", "DiscretePrior", "BernsteinPrior",
    "FitConfig", "FitResult", "PlantedInstance",
    "load_edge_list", "load_metadata", "from_edges",
    "write_edge_list", "write_metadata",
    "discrete_column", "ordered_column", "constant_column",
    "bernstein_basis", "eval_prior", "prior_matrix",
    "m_step_gamma_discrete", "m_step_gamma_ordered", "m_step_theta",
    "init_messages", "run_bp", "exact_marginals",
    "bethe_log_likelihood", "fit", "predict_from_metadata",
    "nmi", "conditional_entropy_model", "fraction_correct",
    "generate_sbm", "generate_metadata", "make_instance",
    "detectability_threshold", "benchmark_fig1a", "benchmark_fig1b",
]
