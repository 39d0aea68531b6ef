# Pipeline module - model wiring, training, checkpoints and run artifacts
from .settings import ModelConfig, TrainConfig, RunConfig, load_run_config
from .model import (
    Batch, ForwardResult, ReaderModel, init_params, build_model, make_batch,
    forward, forward_baseline, predict, predict_spans,
)
from .checkpoint import Checkpoint, save_checkpoint, load_checkpoint
from .trainer import Adam, EpochRecord, TrainResult, train, write_metrics_csv
from .attention import AttentionDump, dump_attention, load_attention_dump
from .ablation import AblationRow, run_ablation, write_ablation_csv

__all__ = [
    'ModelConfig', 'TrainConfig', 'RunConfig', 'load_run_config',
    'Batch', 'ForwardResult', 'ReaderModel', 'init_params', 'build_model', 'make_batch',
    'forward', 'forward_baseline', 'predict', 'predict_spans',
    'Checkpoint', 'save_checkpoint', 'load_checkpoint',
    'Adam', 'EpochRecord', 'TrainResult', 'train', 'write_metrics_csv',
    'AttentionDump', 'dump_attention', 'load_attention_dump',
    'AblationRow', 'run_ablation', 'write_ablation_csv',
]
