"""Conversation-level emotion classification with temporal and spatial
context encoders and an emotion-shift curriculum."""

from .curriculum import CurriculumSchedule, cl_loss, difficulty, epoch_ratio, speaker_shift_counts, weight
from .data import Batch, Conversation, Dataset, SynthSpec, Utterance, load_dataset, make_batches, save_dataset, synthesize
from .metrics import MetricsReport, aggregate, build_report, confusion_matrix, f1_scores
from .model import PRESETS, ModelConfig, ModelParams, forward, init_params, load_checkpoint, predict, save_checkpoint, standard_loss
from .tensor import Tensor, alloc, backward, finite_diff_check
from .train import Flags, RunHistory, evaluate, train

__version__ = "0.1.0"
