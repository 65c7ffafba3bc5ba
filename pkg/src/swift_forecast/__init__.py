"""Wavelet-domain forecaster toolkit: transform, model, training, data,
weight analysis, and checkpointing."""

from .analysis import WeightTriple, analyze_pair, cosine_sim, export_heatmap, lr_decompose
from .checkpoint import load_checkpoint, load_model, save_checkpoint, save_model
from .data import (
    RawSeries,
    Scaler,
    SplitData,
    SplitSpec,
    SynthParams,
    gather_windows,
    load_csv,
    split,
    standardize,
    synth_nonstationary,
    window_starts,
    write_csv,
)
from .errors import SwiftError
from .model import (
    ForwardCache,
    ModelConfig,
    SwiftModel,
    backward,
    band_mix,
    count_macs,
    count_params,
    denormalize,
    forward,
    head_map,
    init_model,
    normalize,
)
from .training import (
    AdamState,
    History,
    TrainConfig,
    adam_step,
    evaluate,
    mse_loss,
    onecycle_lr,
    train,
)
from .wavelet import BandTensor, FilterPair, dwt1, idwt1, make_filters

__version__ = "0.1.0"
