"""Interpretable hierarchical text classification with sentence topics.

Documents are encoded sentence by sentence twice: a label-dependent context
vector from an attention-pooled biLSTM, and a label-independent topic
distribution from a variational topic autoencoder. Sentences become nodes of
a graph weighted by topic similarity, and a graph attention pass plus mean
pooling feed the classifier. Word, sentence and topic level explanations are
read off the trained model.
"""

from .config import (DataConfig, EvaluateConfig, InterpretConfig, ModelConfig, PreprocessConfig,
                     RunConfig, TrainConfig, load_config)
from .corpus import Corpus, Document, Vocabulary, load_documents, tokenize_document
from .errors import ConfigError, EmptyDocument, EmptySentence, HintError, NumericalError
from .model import HINT, make_batch
from .noise import Noise
from .trainer import Prediction, load_checkpoint, predict, predict_many, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "Corpus", "ConfigError", "DataConfig", "Document", "EmptyDocument", "EmptySentence",
    "EvaluateConfig", "HINT", "HintError", "InterpretConfig", "ModelConfig", "Noise",
    "NumericalError", "Prediction", "PreprocessConfig", "RunConfig", "TrainConfig", "Vocabulary",
    "load_checkpoint", "load_config", "load_documents", "make_batch", "predict", "predict_many",
    "save_checkpoint", "tokenize_document", "train",
]
