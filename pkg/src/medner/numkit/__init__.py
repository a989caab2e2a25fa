"""Small numpy autodiff kernel shared by every model in the package."""

from . import ops
from .checkpoint import load_params, read_manifest, read_params, save_params
from .gradcheck import finite_diff_check, relative_error
from .optim import ParamStore, adam_step, clip_gradients, glorot_uniform, lr_schedule
from .rnn import GRUCell, LSTMCell, gru_cell_step, lstm_cell_step
from .tensor import Tape, Tensor, finite_checks, get_dtype, precision, set_precision

__all__ = [
    "GRUCell",
    "LSTMCell",
    "ParamStore",
    "Tape",
    "Tensor",
    "adam_step",
    "clip_gradients",
    "finite_checks",
    "finite_diff_check",
    "get_dtype",
    "glorot_uniform",
    "gru_cell_step",
    "load_params",
    "lr_schedule",
    "lstm_cell_step",
    "ops",
    "precision",
    "read_manifest",
    "read_params",
    "relative_error",
    "save_params",
    "set_precision",
]
