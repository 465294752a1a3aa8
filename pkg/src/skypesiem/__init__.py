"""Detect encrypted Skype-like traffic from flow statistics and correlate it in a small SIEM."""
from .errors import SkypeSiemError
from .flowkit import (FeatureVector, FlowKey, FlowRecord, PacketMeta, assemble_flows, decode_capture,
                      extract_features)
from .learnkit import ClassLabel, LabeledDataset, load_dataset, stratified_split
from .metrics import ThresholdConfig, calibrate_threshold, classification_report, roc_auc
from .voting import Ensemble, harden, majority_vote

__version__ = "0.1.0"

__all__ = [
    "ClassLabel", "Ensemble", "FeatureVector", "FlowKey", "FlowRecord", "LabeledDataset",
    "PacketMeta", "SkypeSiemError", "ThresholdConfig", "assemble_flows", "calibrate_threshold",
    "classification_report", "decode_capture", "extract_features", "harden", "load_dataset",
    "majority_vote", "roc_auc", "stratified_split",
]
