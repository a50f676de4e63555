"""Purely Boolean neural networks trained by Boolean error backpropagation."""

from .bitcore import BitMatrix, BitVector, Rng, concat_rows, elementwise, make_matrix, popcount_rows, random_matrix
from .layers import ForwardTrace, Layer, Model, forward_batch, gate_eval, layer_forward, model_forward, row_activation
from .projection import ProjectionProblem, project_exact, project_greedy, project_specialized, retain_one
from .sensitivity import (
    full_sensitivity,
    neg_sensitivity,
    pos_sensitivity,
    selection_expansion,
    specialized_sensitivity,
)
from .training import Batch, TrainConfig, evaluate, fit, train_batch

__version__ = "0.1.0"
