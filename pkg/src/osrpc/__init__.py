"""Ordinal supervised robust profile clustering (osRPC) and the osLCM baseline.

Gibbs samplers for an overfitted global/local mixture of categorical
exposures coupled to an ordinal probit outcome, the three-pattern simulation
generator, and post-processing (relabeling, posterior summaries, DIC, metrics).
"""
from .data import (CategoricalDataset, CsvSchema, SimulationConfig, SimulationTruth,
                   build_design_matrix, load_csv, simulate, write_csv)
from .errors import (DataParseError, DecompositionError, DegenerateFitError, InvalidParameterError,
                     InvalidStateError, NumericalError, NumericalUnderflowError, OsrpcError)
from .gibbs import (FitResult, FitSession, Hyperparameters, ModelState, SamplerConfig, fit,
                    run_adaptive, run_fixed)
from .postprocess import (MetricBundle, PosteriorSummary, build_similarity, compute_dic, evaluate,
                          relabel_trace, summarize)
from .trace import ChainTrace

__version__ = "0.1.0"
