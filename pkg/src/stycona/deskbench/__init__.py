"""Desk-scale cross-domain segmentation benchmark (requires torch)."""

from .bench import (
    ArmConfig,
    ExperimentConfig,
    TrainResult,
    config_from_dict,
    default_config,
    default_config_path,
    evaluate,
    format_table,
    load_config,
    run_matrix,
    run_one,
    train,
)
from .loss import seg_loss
from .model import Segmenter
from .synth import SynthDomainSpec, generate_domain, generate_sample
