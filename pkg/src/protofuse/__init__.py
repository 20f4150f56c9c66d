"""Few-shot adaptation of frozen-model outputs.

Fuses calibrated prompt-elicited class scores with a trainable
hypersphere-prototype decoder over output hidden states.
"""

from .decoder import (
    CalibrationRecord,
    DecoderModel,
    FeatureRecord,
    MlpParams,
    ScoredExample,
    calibrate,
    fuse_and_softmax,
    mlp_score,
    predict,
    proto_score,
    project,
    score_record,
    softmax,
)
from .data import (
    FeatureHeader,
    ShotSplit,
    load_calibration,
    load_feature_file,
    load_model,
    make_shot_split,
    save_model,
    select_records,
    write_calibration,
    write_feature_file,
)
from .decoder import batch_logits, batch_predict
from .errors import (
    CalibrationDegenerateError,
    ConfigError,
    MissingClassError,
    NumericsError,
    ParseError,
    ProtofuseError,
    SchemaError,
)
from .training import TrainingConfig, TrainState, adam_step, gradients, init_model, loss, train

__all__ = [
    "CalibrationDegenerateError",
    "CalibrationRecord",
    "ConfigError",
    "DecoderModel",
    "FeatureHeader",
    "FeatureRecord",
    "MissingClassError",
    "MlpParams",
    "NumericsError",
    "ParseError",
    "ProtofuseError",
    "SchemaError",
    "ScoredExample",
    "ShotSplit",
    "TrainState",
    "TrainingConfig",
    "adam_step",
    "batch_logits",
    "batch_predict",
    "calibrate",
    "fuse_and_softmax",
    "gradients",
    "init_model",
    "load_calibration",
    "load_feature_file",
    "load_model",
    "loss",
    "make_shot_split",
    "mlp_score",
    "predict",
    "project",
    "proto_score",
    "save_model",
    "score_record",
    "select_records",
    "softmax",
    "train",
    "write_calibration",
    "write_feature_file",
]
