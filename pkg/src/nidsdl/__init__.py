"""Binary network-intrusion detection on NSL-KDD: preprocessing, five
small neural classifiers trained from scratch, oracle-checked metrics,
and a flow-classification service."""

__version__ = "0.1.0"

from .ingest import (
    DEFAULT_SCHEMA,
    NSL_KDD_FEATURES,
    TABLE1_FEATURES,
    FeatureSchema,
    Label,
    RawRecord,
    binarize_label,
    load_file,
    parse_dataset,
)
from .preprocess import (
    EncodedDataset,
    Encoder,
    SelectionReport,
    encode,
    encode_dataset,
    fit_encoder,
    min_max,
    rank_features,
    select_top_k,
    split,
)
from .models import ARCHITECTURES, ModelSpec, TrainConfig, TrainedModel, build, predict, train
from .metrics import ConfusionMatrix, EvalReport, auc, confusion, evaluate, roc_curve
from .persist import load_model, read_model, save_model, write_model

__all__ = [name for name in dir() if not name.startswith("_")]
