"""Noisy flag syndrome extraction: gate-level circuits, a shot-by-shot
reference protocol and a vectorized batch engine."""

from .batch import BatchResult, BatchSimulator, ForcedBatch
from .circuit import HalfRound, NoiseParams, PauliFrame
from .protocol import DecoderConfig, ProtocolSetup, SampleOutcome, run_protocol

__all__ = [
    "BatchResult",
    "BatchSimulator",
    "DecoderConfig",
    "ForcedBatch",
    "HalfRound",
    "NoiseParams",
    "PauliFrame",
    "ProtocolSetup",
    "SampleOutcome",
    "run_protocol",
]
