"""Temporal-coded spiking network for raw lidar pulse classification.

The package splits into five parts: exact single-neuron spike math (core),
batched closed-form forward/backward passes (batch), the gradient trainer
(training), synthetic pulse-scene generation (scenes), and event-driven
inference with its evaluation metrics (events).  The cli module wires them
into the gen-data / train / eval / bench commands.
"""

from .core import (
    NEVER,
    T_MAX_US,
    InvalidDims,
    InvalidStep,
    KernelConfig,
    Model,
    ShapeMismatch,
    causal_spike_time,
    integrate_membrane,
    kernel_response,
    layer_forward,
    network_forward,
)
from .batch import forward_network_batch, predict_batch
from .events import (
    DatasetMismatch,
    EvalMetrics,
    EventTrace,
    agreement_check,
    evaluate,
    run_event_inference,
)
from .scenes import (
    DelayMap,
    NoiseSpec,
    PulseDataset,
    UnknownClass,
    generate_dataset,
    load_dataset,
    render_scene,
    save_dataset,
)
from .training import (
    DegenerateOutput,
    TrainConfig,
    TrainReport,
    accuracy,
    init_weights,
    load_model,
    save_model,
    train,
)

__all__ = [
    "NEVER",
    "T_MAX_US",
    "InvalidDims",
    "InvalidStep",
    "KernelConfig",
    "Model",
    "ShapeMismatch",
    "causal_spike_time",
    "integrate_membrane",
    "kernel_response",
    "layer_forward",
    "network_forward",
    "forward_network_batch",
    "predict_batch",
    "DatasetMismatch",
    "EvalMetrics",
    "EventTrace",
    "agreement_check",
    "evaluate",
    "run_event_inference",
    "DelayMap",
    "NoiseSpec",
    "PulseDataset",
    "UnknownClass",
    "generate_dataset",
    "load_dataset",
    "render_scene",
    "save_dataset",
    "DegenerateOutput",
    "TrainConfig",
    "TrainReport",
    "accuracy",
    "init_weights",
    "load_model",
    "save_model",
    "train",
]
