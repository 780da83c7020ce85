"""Generative models of typed event streams in continuous time.

Three model families share one process protocol: the Hawkes process
(``sempp``), its self-modulating variant with a softplus transfer
(``dsmpp``), and a neural variant driven by a continuous-time LSTM
(``nsmmpp``).
"""
from .classical import DSMPPParams, SEMPPParams, softplus_scaled
from .ctlstm import CTLSTMParams, param_count
from .events import BOS, Dataset, Event, EventStream, StreamError, load_dataset, save_dataset
from .likelihood import NumericalError, finite_diff_check, gradient, log_likelihood
from .models import KINDS, count_params, load_model, save_model
from .predictor import evaluate_predictions, predict_next
from .sampler import BoundViolation, SampleConfig, sample_dataset, sample_stream
from .trainer import TrainConfig, train

__all__ = [
    "BOS", "KINDS", "BoundViolation", "CTLSTMParams", "DSMPPParams", "Dataset", "Event", "EventStream",
    "NumericalError", "SEMPPParams", "SampleConfig", "StreamError", "TrainConfig", "count_params",
    "evaluate_predictions", "finite_diff_check", "gradient", "load_dataset", "load_model", "log_likelihood",
    "param_count", "predict_next", "sample_dataset", "sample_stream", "save_dataset", "save_model",
    "softplus_scaled", "train",
]
