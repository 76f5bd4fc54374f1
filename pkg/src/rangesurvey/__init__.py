"""Active-learning survey simulation for species range estimation.

The package models an unmapped species' range as a posterior-weighted
combination of pretrained candidate range models, actively picks the next
geographic cell to survey, and provides a config-driven harness for racing
query strategies on synthetic or file-loaded worlds.
"""

from .errors import (ConfigError, ExhaustedError, GenerationError, IllPosedError,
                     ParseError, RangeSurveyError)
from .grid import (Cell, RandomProjectionEncoder, SurveyGrid, TrigEncoder,
                   build_fibonacci_grid, encode_random_projection, encode_trig,
                   load_grid, make_encoder, save_grid)
from .hypotheses import (Hypothesis, HypothesisSet, Observation, ObservationLog,
                         PosteriorState, committee_prediction, load_hypotheses,
                         log_likelihood, predict, save_hypotheses, update_posterior)
from .learner import (FittedModel, TrainConfig, fit_logistic, fuse_online,
                      weighted_average_model)
from .metrics import (AggregateCurve, RunTrace, aggregate_traces, average_precision,
                      map_at, map_auc)
from .oracle import (GroundTruth, NoiseModel, init_observations, load_ground_truth,
                     query_label, save_ground_truth)
from .strategies import (STRATEGY_NAMES, QueryContext, StrategySpec, next_query,
                         parse_strategy, select_emc, select_hss, select_positive,
                         select_qbc, select_random, select_uncertain)
from .synth import SynthConfig, build_synthetic_world, gen_hypotheses, gen_test_species
from .experiment import (ExperimentConfig, ExperimentResult, WorldConfig,
                         config_from_dict, run_experiment, run_single)

__version__ = "0.1.0"
