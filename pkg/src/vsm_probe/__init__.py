"""Probe the cultural values chat models express on Hofstede's VSM 2013."""

from .collection import ExperimentSet, ResponseVector, aggregate_identity, load_experiment_set, parse_response, run_experiment
from .gateway import (
    ChatRequest,
    ChatResponse,
    EndpointConfig,
    HttpBackend,
    ReplayBackend,
    ReplayCache,
    RetryPolicy,
    SamplingParams,
    cache_key,
    scripted_responder,
)
from .metrics import dbi, dimension_dispersion, mcd, pearson, silhouette, ss_h
from .protocol import ExperimentConfig, Gender, Identity, Nation, build_prompt, identity_grid
from .questionnaire import Locale, load_questionnaire, present_options
from .reference_data import load_human_reference, load_mmlu
from .reporting import comparison_matrix, export, intra_set_report, mmlu_delta_matrix
from .scoring import Dimension, ScoringConstants, VsmScore, national_aggregate, set_centroid, vsm_score

__version__ = "0.1.0"
