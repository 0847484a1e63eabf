"""Behavioral modeling toolkit for nonlinear RF power amplifiers."""

from .errors import ArgumentError, ConfigurationError, PipelineError, ShapeError, TrainingError
from .evaluation import compare_report, error_spectrum, nmse_db
from .features import FeatureConfig, build_carrier_matrix, build_input_tensor, build_mlp_features
from .gmp import GmpIndex, GmpModel, gmp_design_matrix, gmp_fit, gmp_predict
from .models import (
    TrainConfig,
    build_arvtdnn,
    build_dnn,
    build_drvcnn,
    load_predesigned_filter,
    predict_series,
    train_mlp,
    train_two_stage,
)
from .neuralcore import count_parameters
from .signals import (
    CarrierConfig,
    ComplexSeries,
    Dataset,
    PaOracleConfig,
    SignalConfig,
    combine_carriers,
    demux_carriers,
    generate_ofdm_carrier,
    reference_pa,
    split_dataset,
    synthesize_dataset,
)

__version__ = "0.1.0"
