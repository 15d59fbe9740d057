"""Training loop, gradients and evaluation metrics."""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .encoders import EncodedInput
from .errors import ConfigError, MetricsError
from .model import (
    ANCILLA,
    PURE,
    ClassModel,
    build_classifier_circuit,
    class_probabilities,
    decide,
    fidelities,
)
from .simcore import Circuit, ancilla_probabilities, simulate_batch

PROB_CLAMP = 1e-12
FD_STEP = 1e-5

_HALF_PI = math.pi / 2
# four-term rule for controlled rotations (generator eigenvalues 0, +-1/2)
_C_PLUS = (math.sqrt(2) + 1) / (4 * math.sqrt(2))
_C_MINUS = (math.sqrt(2) - 1) / (4 * math.sqrt(2))
SHIFT_RULES = {
    "RX": ((_HALF_PI, 0.5), (-_HALF_PI, -0.5)),
    "RY": ((_HALF_PI, 0.5), (-_HALF_PI, -0.5)),
    "RZ": ((_HALF_PI, 0.5), (-_HALF_PI, -0.5)),
    "CRY": (
        (_HALF_PI, _C_PLUS), (-_HALF_PI, -_C_PLUS),
        (3 * _HALF_PI, -_C_MINUS), (-3 * _HALF_PI, _C_MINUS),
    ),
}


class GradientMethod(str, enum.Enum):
    PARAMETER_SHIFT = "parameter_shift"
    FINITE_DIFFERENCE = "finite_difference"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs_per_class: int = 5
    batch_size: int = 1
    gradient_method: GradientMethod = GradientMethod.PARAMETER_SHIFT
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gradient_method", GradientMethod(self.gradient_method))
        if not self.learning_rate >= 0 or not math.isfinite(self.learning_rate):
            raise ConfigError(f"learning_rate must be a nonnegative number, got {self.learning_rate}")
        if self.epochs_per_class < 1:
            raise ConfigError(f"epochs_per_class must be >= 1, got {self.epochs_per_class}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class MetricsRecord:
    epoch: int
    accuracy: float
    loss: float
    entropy: float
    wall_time: float = 0.0
    class_phase: str = ""
    train_fidelity: float = float("nan")


def bce_loss(y: int, p: float) -> float:
    p = min(max(float(p), PROB_CLAMP), 1.0 - PROB_CLAMP)
    if y == 1:
        return -math.log(p)
    if y == 0:
        return -math.log(1.0 - p)
    raise MetricsError(f"label must be 0 or 1, got {y!r}")


def entropy(p: Sequence[float]) -> float:
    """Shannon entropy in nats; 0 log 0 counts as 0."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise MetricsError("entropy needs a nonempty probability vector")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise MetricsError(f"not a probability vector: {p}")
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def accuracy(predictions: Sequence, truths: Sequence) -> float:
    if len(predictions) != len(truths):
        raise MetricsError(f"{len(predictions)} predictions for {len(truths)} labels")
    if not len(truths):
        raise MetricsError("accuracy of an empty set is undefined")
    return sum(str(p) == str(t) for p, t in zip(predictions, truths)) / len(truths)


def _raw_fidelity(circuits: Sequence[Circuit]) -> np.ndarray:
    # unclipped 2*p0 - 1 keeps the shift rule exact
    return 2.0 * ancilla_probabilities(simulate_batch(circuits), ANCILLA, 0) - 1.0


def _shifted(circuit: Circuit, position: int, delta: float) -> Circuit:
    ops = list(circuit.ops)
    ops[position] = ops[position].shifted(delta)
    return Circuit(circuit.num_qubits, ops)


def _param_circuits(model: ClassModel, sample: EncodedInput, param_index: int, method: GradientMethod):
    """Circuits and weights whose weighted fidelity sum is dF/dtheta_k."""
    if method is GradientMethod.FINITE_DIFFERENCE:
        out = []
        for sign in (1, -1):
            m = model.copy()
            m.params[param_index] += sign * FD_STEP
            out.append((build_classifier_circuit(m, sample), sign / (2 * FD_STEP)))
        return out
    base = build_classifier_circuit(model, sample)
    out = []
    # product rule: a parameter shared by several gates is shifted one gate at a time
    for pos, op in enumerate(base.ops):
        if op.param_index == param_index:
            for delta, coeff in SHIFT_RULES[op.kind]:
                out.append((_shifted(base, pos, delta), coeff))
    return out


def fidelity_gradient(model: ClassModel, sample: EncodedInput, param_index: int,
                      method=GradientMethod.PARAMETER_SHIFT) -> float:
    method = GradientMethod(method)
    if not 0 <= param_index < model.num_params:
        raise ConfigError(f"parameter index {param_index} out of range for {model.num_params} parameters")
    terms = _param_circuits(model, sample, param_index, method)
    if not terms:
        return 0.0
    values = _raw_fidelity([c for c, _ in terms])
    return float(np.dot(values, [w for _, w in terms]))


def batch_gradient(model: ClassModel, samples: Sequence[EncodedInput],
                   method=GradientMethod.PARAMETER_SHIFT) -> Tuple[np.ndarray, np.ndarray]:
    """Mean fidelity gradient over ``samples`` and the per-sample fidelities.

    All shifted circuits go through one batched simulation. The sum runs
    in sample order so the result does not depend on evaluation order.
    """
    method = GradientMethod(method)
    circuits: List[Circuit] = []
    owners: List[Tuple[int, int, float]] = []
    for s_idx, sample in enumerate(samples):
        circuits.append(build_classifier_circuit(model, sample))
        owners.append((s_idx, -1, 0.0))
        for k in range(model.num_params):
            for circ, w in _param_circuits(model, sample, k, method):
                circuits.append(circ)
                owners.append((s_idx, k, w))
    values = _raw_fidelity(circuits)
    grads = np.zeros((len(samples), model.num_params))
    fids = np.zeros(len(samples))
    for (s_idx, k, w), v in zip(owners, values):
        if k < 0:
            fids[s_idx] = max(0.0, v)
        else:
            grads[s_idx, k] += w * v
    return grads.mean(axis=0), fids


def evaluate(model3: ClassModel, model6: ClassModel, samples: Sequence[EncodedInput],
             labels: Sequence[str], backend=PURE, workers: int = 1, epoch: int = 0) -> MetricsRecord:
    """Accuracy, mean BCE (class '3' is y=1) and mean entropy on a labelled set."""
    if not len(samples):
        raise MetricsError("cannot evaluate on an empty test set")
    if len(samples) != len(labels):
        raise MetricsError(f"{len(samples)} samples for {len(labels)} labels")
    f3 = fidelities(model3, samples, backend, workers)
    f6 = fidelities(model6, samples, backend, workers)
    return metrics_from_fidelities(f3, f6, labels, (model3.label, model6.label), epoch)


def metrics_from_fidelities(f3, f6, labels, class_labels=("3", "6"), epoch: int = 0) -> MetricsRecord:
    preds, losses, ents = [], [], []
    for a, b, truth in zip(f3, f6, labels):
        p3, p6 = class_probabilities(float(a), float(b))
        preds.append(decide(float(a), float(b), class_labels))
        losses.append(bce_loss(1 if str(truth) == class_labels[0] else 0, p3))
        ents.append(entropy([p3, p6]))
    return MetricsRecord(
        epoch=epoch,
        accuracy=accuracy(preds, labels),
        loss=float(np.mean(losses)),
        entropy=float(np.mean(ents)),
    )


EpochHook = Callable[[ClassModel, int], MetricsRecord]


def train_class(model: ClassModel, samples: Sequence[EncodedInput], cfg: TrainConfig,
                rng: np.random.Generator, on_epoch: Optional[EpochHook] = None,
                first_epoch: int = 1) -> Tuple[ClassModel, List[MetricsRecord]]:
    """Gradient ascent on the mean swap-test fidelity against one class.

    ``on_epoch(model, epoch)`` supplies the per-epoch metrics (usually an
    evaluation of both class models on the test split); without it only
    the training fidelity is recorded.
    """
    if not len(samples):
        raise ConfigError(f"no training samples for class {model.label!r}")
    records = []
    start = time.perf_counter()
    n = len(samples)
    for e in range(cfg.epochs_per_class):
        order = rng.permutation(n)
        epoch_fids = np.zeros(n)
        for b in range(0, n, cfg.batch_size):
            idx = order[b:b + cfg.batch_size]
            grad, fids = batch_gradient(model, [samples[i] for i in idx], cfg.gradient_method)
            epoch_fids[idx] = fids
            model.params = model.params + cfg.learning_rate * grad
        epoch = first_epoch + e
        if on_epoch is not None:
            rec = on_epoch(model, epoch)
        else:
            rec = MetricsRecord(epoch, float("nan"), float("nan"), float("nan"))
        rec.epoch = epoch
        rec.class_phase = model.label
        # fidelities seen during the pass, i.e. before each sample's own update
        rec.train_fidelity = float(epoch_fids.mean())
        if on_epoch is None:
            rec.wall_time = time.perf_counter() - start
        records.append(rec)
    return model, records
