"""Hand-gesture sequence classification from skeleton features.

Pipeline: 21-point hand frames -> 31 joint-angle/displacement features
per instant -> adaptive extrema-based resampling to a fixed length ->
stacked peephole-LSTM classifier whose per-instant outputs are summed
before the softmax.
"""

from .errors import GestureError
from .features import FEATURE_DIM, FeatureMask, GestureSequence, extract_features
from .network import DlstmModel, forward, forward_batch, load_checkpoint, predict, save_checkpoint
from .sampling import build_plan, resample_sequence
from .skeleton import Finger, HandFrame, Joint, RawSequence
from .training import LabeledSequence, TrainConfig, backward, gradcheck, loss, train
from .evaluation import EvalReport, evaluate, report_from_confusion

__version__ = "0.1.0"

__all__ = [
    "FEATURE_DIM",
    "DlstmModel",
    "EvalReport",
    "FeatureMask",
    "Finger",
    "GestureError",
    "GestureSequence",
    "HandFrame",
    "Joint",
    "LabeledSequence",
    "RawSequence",
    "TrainConfig",
    "backward",
    "build_plan",
    "evaluate",
    "extract_features",
    "forward",
    "forward_batch",
    "gradcheck",
    "load_checkpoint",
    "loss",
    "predict",
    "report_from_confusion",
    "resample_sequence",
    "save_checkpoint",
    "train",
    "__version__",
]
