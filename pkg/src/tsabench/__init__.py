"""Benchmark harness for time-series attribution methods.

Ranks attribution (XAI) techniques by perturbing the time points they mark
relevant and measuring how much the model's quality metric degrades compared
to matched random perturbations.  Three stages: model training, model
explanation, explanation evaluation.
"""

from .attribution import (AttributionMap, MethodConfig, compute_attributions,
                          input_x_gradient, integrated_gradients,
                          lime_surrogate, load_attributions,
                          load_external_attributions, normalize, occlusion,
                          oracle_attribution, saliency, save_attributions,
                          shapley_sampling, smoothgrad)
from .config import RunConfig, build_run_config, load_run_config
from .dataset import (Dataset, TimeSeriesSample, generate_spike_dataset,
                      load_ucr_tsv, make_windowed_regression, save_ucr_tsv,
                      split_dataset, znormalize)
from .errors import (AlignmentError, CapabilityError, ConfigError,
                     DatasetFormatError, DatasetParseError, DivergenceError,
                     IncompleteRunError, ProtocolError, TransportError,
                     TsabenchError, ValidationError)
from .evaluation import (AssumptionTable, RunReport, ScoreRecord,
                         VariantDataset, accuracy, build_variants,
                         check_assumption, rank_methods, rmse, score_variants)
from .models import (BuiltinPredictor, Predictor, TrainConfig, load_model,
                     save_model, train, train_ensemble)
from .adapter import AdapterEndpoint, AdapterPredictor
from .perturbation import (ReferenceRange, VerificationMethod,
                           default_interval_radius, perturb_interval,
                           perturb_points, reference_range)
from .runner import RunResult, execute_run
from .seeding import derive_seed, rng_for
from .selection import (RandomBaselineSet, SelectionResult, load_selections,
                        random_baselines, save_selections, select,
                        select_dynamic, select_fixed, select_topk)

__version__ = "0.1.0"
