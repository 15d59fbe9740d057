"""Swap-test variational classifier comparing basis, rotation and amplitude encodings."""

from .encoders import EncodedInput, EncodingMethod, amplitude_encode, basis_encode, qubit_cost, rotation_encode
from .errors import QuencodeError
from .model import ClassModel, build_classifier_circuit, predict, swap_test
from .noise import DDPolicy, NoiseConfig, NoisyBackend, preset

__version__ = "0.1.0"

__all__ = [
    "ClassModel",
    "DDPolicy",
    "EncodedInput",
    "EncodingMethod",
    "NoiseConfig",
    "NoisyBackend",
    "QuencodeError",
    "amplitude_encode",
    "basis_encode",
    "build_classifier_circuit",
    "predict",
    "preset",
    "qubit_cost",
    "rotation_encode",
    "swap_test",
]
