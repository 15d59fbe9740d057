"""Five-qubit swap-test classifier.

Qubit 0 is the measured ancilla, qubits 1-2 carry the trainable class
state and qubits 3-4 carry the encoded sample. The ancilla reads
P(0) = (1 + F) / 2 where F is the fidelity of the two registers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .encoders import EncodedInput
from .errors import ModelError
from .simcore import (
    Circuit,
    GateOp,
    ancilla_probabilities,
    cry,
    cswap,
    cz,
    h,
    measure_probability,
    run_circuit,
    ry,
    rz,
    simulate_batch,
)

ANCILLA = 0
LEARN_QUBITS = (1, 2)
DATA_QUBITS = (3, 4)
NUM_QUBITS = 5
TIE_TOL = 1e-12


class LayerKind(str, enum.Enum):
    SINGLE = "single"
    DUAL = "dual"
    ENTANGLE = "entangle"


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    entangler: str = "cz"

    def __post_init__(self):
        object.__setattr__(self, "kind", LayerKind(self.kind))
        if self.kind is LayerKind.ENTANGLE and self.entangler not in ("cz", "cry"):
            raise ModelError(f"unknown entangler {self.entangler!r}")

    @property
    def num_params(self) -> int:
        if self.kind is LayerKind.SINGLE:
            return 4
        if self.kind is LayerKind.DUAL:
            return 2
        return 1 if self.entangler == "cry" else 0

    @classmethod
    def parse(cls, text: str) -> "LayerSpec":
        kind, _, ent = text.strip().partition(":")
        try:
            return cls(LayerKind(kind), ent or "cz")
        except ValueError:
            raise ModelError(f"bad layer spec {text!r}") from None

    def __str__(self):
        if self.kind is LayerKind.ENTANGLE:
            return f"entangle:{self.entangler}"
        return self.kind.value


DEFAULT_LAYERS = (LayerSpec(LayerKind.DUAL), LayerSpec(LayerKind.ENTANGLE, "cz"), LayerSpec(LayerKind.SINGLE))


def parse_layers(text) -> Tuple[LayerSpec, ...]:
    if isinstance(text, str):
        text = text.split(",")
    return tuple(t if isinstance(t, LayerSpec) else LayerSpec.parse(t) for t in text)


@dataclass
class ClassModel:
    label: str
    layers: Tuple[LayerSpec, ...] = DEFAULT_LAYERS
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.label = str(self.label)
        self.layers = parse_layers(self.layers)
        self.params = np.asarray(self.params, dtype=float).copy()
        if self.params.size == 0 and self.num_params:
            self.params = np.zeros(self.num_params)
        self.check()

    @property
    def num_params(self) -> int:
        return sum(layer.num_params for layer in self.layers)

    def check(self):
        if self.params.shape != (self.num_params,):
            raise ModelError(
                f"model {self.label!r} expects {self.num_params} parameters, has {self.params.size}"
            )

    @classmethod
    def random(cls, label, rng: np.random.Generator, layers=DEFAULT_LAYERS) -> "ClassModel":
        layers = parse_layers(layers)
        n = sum(layer.num_params for layer in layers)
        return cls(label, layers, rng.uniform(0.0, 2 * math.pi, n))

    def copy(self) -> "ClassModel":
        return ClassModel(self.label, self.layers, self.params.copy())

    def learning_ops(self, qubits: Sequence[int] = LEARN_QUBITS) -> List[GateOp]:
        self.check()
        qa, qb = qubits
        p = self.params
        ops: List[GateOp] = []
        k = 0
        for layer in self.layers:
            if layer.kind is LayerKind.DUAL:
                for q in (qa, qb):
                    ops += [ry(q, p[k], k), rz(q, p[k + 1], k + 1)]
            elif layer.kind is LayerKind.SINGLE:
                ops += [ry(qa, p[k], k), rz(qa, p[k + 1], k + 1), ry(qb, p[k + 2], k + 2), rz(qb, p[k + 3], k + 3)]
            elif layer.entangler == "cz":
                ops.append(cz(qa, qb))
            else:
                ops.append(cry(qa, qb, p[k], k))
            k += layer.num_params
        return ops

    def save(self, path) -> None:
        write_checkpoint([self], path)


@dataclass(frozen=True)
class SwapTestResult:
    p0: float
    fidelity: float

    @classmethod
    def from_p0(cls, p0: float) -> "SwapTestResult":
        return cls(float(p0), max(0.0, 2.0 * float(p0) - 1.0))


class PureBackend:
    """Exact noiseless statevector evaluation."""

    name = "pure"

    def ancilla_p0(self, circuit: Circuit) -> float:
        return measure_probability(run_circuit(circuit), ANCILLA, 0)

    def ancilla_p0_many(self, circuits: Sequence[Circuit], workers: int = 1) -> np.ndarray:
        return ancilla_probabilities(simulate_batch(circuits), ANCILLA, 0)


PURE = PureBackend()


def build_classifier_circuit(model: ClassModel, sample: EncodedInput, idle_markers: bool = True) -> Circuit:
    circ = Circuit(NUM_QUBITS)
    circ.append(h(ANCILLA))
    circ.extend(model.learning_ops())
    circ.extend(sample.fragment(DATA_QUBITS))
    for a, b in zip(LEARN_QUBITS, DATA_QUBITS):
        circ.append(cswap(ANCILLA, a, b))
    circ.append(h(ANCILLA))
    return circ.with_idle_markers() if idle_markers else circ


def swap_test(model: ClassModel, sample: EncodedInput, backend=PURE) -> SwapTestResult:
    return SwapTestResult.from_p0(backend.ancilla_p0(build_classifier_circuit(model, sample)))


def fidelities(model: ClassModel, samples: Sequence[EncodedInput], backend=PURE, workers: int = 1) -> np.ndarray:
    """Clipped swap-test fidelity of ``model`` against every sample."""
    circuits = [build_classifier_circuit(model, s) for s in samples]
    p0 = np.asarray(backend.ancilla_p0_many(circuits, workers=workers), dtype=float)
    return np.maximum(0.0, 2.0 * p0 - 1.0)


def class_probabilities(f3: float, f6: float) -> Tuple[float, float]:
    total = f3 + f6
    if total < 1e-12:
        return 0.5, 0.5
    return f3 / total, f6 / total


def decide(f3: float, f6: float, labels=("3", "6")) -> str:
    if abs(f3 - f6) < TIE_TOL or f3 > f6:
        return labels[0]
    return labels[1]


def predict(sample: EncodedInput, model3: ClassModel, model6: ClassModel, backend=PURE) -> str:
    f3 = swap_test(model3, sample, backend).fidelity
    f6 = swap_test(model6, sample, backend).fidelity
    return decide(f3, f6, (model3.label, model6.label))


def write_checkpoint(models: Sequence[ClassModel], path) -> None:
    lines = ["# quencode checkpoint v1"]
    for m in models:
        lines.append(f"[model {m.label}]")
        lines.append("layers = " + ",".join(str(layer) for layer in m.layers))
        lines.append("params = " + " ".join(repr(float(v)) for v in m.params))
    Path(path).write_text("\n".join(lines) + "\n")


def read_checkpoint(path) -> List[ClassModel]:
    models = []
    label: Optional[str] = None
    layers = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[model ") and line.endswith("]"):
            label = line[len("[model "):-1]
            layers = None
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or label is None:
            raise ModelError(f"{path}:{lineno}: unexpected line {raw!r}")
        if key == "layers":
            layers = parse_layers(value)
        elif key == "params":
            if layers is None:
                raise ModelError(f"{path}:{lineno}: params before layers")
            values = [float(v) for v in value.split()]
            models.append(ClassModel(label, layers, values))
        else:
            raise ModelError(f"{path}:{lineno}: unknown key {key!r}")
    return models
