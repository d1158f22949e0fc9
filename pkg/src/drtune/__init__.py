"""Auto-tuning of dimension-reduction hyperparameters on data subsamples.

The package tunes normalized hyperparameters of a dimension-reduction
method (a built-in t-SNE or any external command following the request
directory protocol) against repeat-averaged embedding-quality losses,
using a Bayesian surrogate over a small pilot design, then transfers the
optimum to the full dataset.  Post-hoc analyses cover two-objective
Pareto fronts and variance-based sensitivity of the fitted surrogate.
"""

from .analysis import (ObjectiveSample, ParetoResult, SobolResult,
                       merged_objective_samples, pareto_front, sobol_indices)
from .core import (DataMatrix, HyperparamDim, HyperparamPoint, HyperparamSpace,
                   SubsampleInfo, TrialRecord, TuningHistory, denormalize_point,
                   derive_seed, make_point, normalize_point)
from .data import (DatasetSpec, bucket_labels, generate_sine,
                   generate_two_cluster, load_csv, save_csv)
from .dr_adapter import (DrEngineSpec, embed_point, external_engine, run_engine,
                         tsne_engine)
from .errors import (ConfigError, DivergenceError, DomainError, DrTuneError,
                     EngineError, FitError, IngestionError, RunAborted)
from .metrics import (Aggregation, CorankingMatrix, MetricSpec, auc_rnx,
                      avg_distance_ratio, coranking, evaluate_metric,
                      misclass_loss, nmi_loss, pairwise_distances,
                      pearson_dist_corr, q_local_global, q_nx, rank_matrix,
                      single_loss)
from .subsample import leverage_sample, leverage_scores, make_subsample, uniform_sample
from .surrogate import (AcquisitionSpec, acquisition, fit, fit_forest, fit_gp,
                        propose_next)
from .tsne import (Embedding, TsneConfig, available_backends, calibrate_sigmas,
                   joint_probabilities, kl_and_gradient, run_tsne)
from .tuner import (CrossEvaluator, TuneConfig, best_so_far_trace, grid_search,
                    run_tuning, transfer_optimum)

__version__ = "0.1.0"

__all__ = [
    "Aggregation", "AcquisitionSpec", "ConfigError", "CorankingMatrix",
    "CrossEvaluator", "DataMatrix", "DatasetSpec", "DivergenceError",
    "DomainError", "DrEngineSpec", "DrTuneError", "Embedding", "EngineError",
    "FitError", "HyperparamDim", "HyperparamPoint", "HyperparamSpace",
    "IngestionError", "MetricSpec", "ObjectiveSample", "ParetoResult",
    "RunAborted", "SobolResult", "SubsampleInfo", "TrialRecord", "TsneConfig",
    "TuneConfig", "TuningHistory", "acquisition", "auc_rnx",
    "available_backends", "avg_distance_ratio", "best_so_far_trace",
    "bucket_labels", "calibrate_sigmas", "coranking", "denormalize_point",
    "derive_seed", "embed_point", "evaluate_metric", "external_engine", "fit",
    "fit_forest", "fit_gp", "generate_sine", "generate_two_cluster",
    "grid_search", "joint_probabilities", "kl_and_gradient", "leverage_sample",
    "leverage_scores", "load_csv", "make_point", "make_subsample",
    "merged_objective_samples", "misclass_loss", "nmi_loss", "normalize_point",
    "pairwise_distances", "pareto_front", "pearson_dist_corr", "propose_next",
    "q_local_global",
    "q_nx", "rank_matrix", "run_engine", "run_tsne", "run_tuning", "save_csv",
    "single_loss", "sobol_indices", "transfer_optimum", "tsne_engine",
    "uniform_sample",
]
