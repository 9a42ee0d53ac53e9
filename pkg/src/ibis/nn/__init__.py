"""From-scratch differentiable classifier: Inception-1D features, BiLSTM
temporal model, softmax head, trained by backprop with a finite-difference
gradient checker."""

from .checkpoint import (parse_checkpoint, parse_checkpoint_file,
                         write_checkpoint, write_checkpoint_file)
from .model import (BaselineModel, BiLstmParams, DenseParams, HybridModel,
                    InceptionBlockParams, NUM_CLASSES, bilstm_forward,
                    inception_forward, init_baseline, init_hybrid, predict_proba)
from .train import (OptimizerConfig, TrainConfig, analytic_gradients, grad_check,
                    max_relative_error, model_loss, numeric_gradients, train)

__all__ = [
    "BaselineModel", "BiLstmParams", "DenseParams", "HybridModel",
    "InceptionBlockParams", "NUM_CLASSES", "OptimizerConfig", "TrainConfig",
    "analytic_gradients", "bilstm_forward", "grad_check", "inception_forward",
    "init_baseline", "init_hybrid", "max_relative_error", "model_loss",
    "numeric_gradients", "parse_checkpoint", "parse_checkpoint_file",
    "predict_proba", "train", "write_checkpoint", "write_checkpoint_file",
]
