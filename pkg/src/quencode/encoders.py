"""Classical-to-quantum encoders producing state-preparation fragments."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np

from .errors import EncodingError
from .simcore import GateOp, cry, cz, ry, rz, x, z


class EncodingMethod(str, enum.Enum):
    BASIS = "basis"
    ROTATION = "rotation"
    AMPLITUDE = "amplitude"

    @classmethod
    def parse(cls, value) -> "EncodingMethod":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise EncodingError(
                f"unknown encoding {value!r}; choose from {[m.value for m in cls]}"
            ) from None


@dataclass(frozen=True)
class EncodedInput:
    method: EncodingMethod
    payload: Union[int, tuple]

    def __post_init__(self):
        method = EncodingMethod.parse(self.method)
        object.__setattr__(self, "method", method)
        if method is EncodingMethod.BASIS:
            if isinstance(self.payload, (bool, float)) or not isinstance(self.payload, (int, np.integer)):
                raise EncodingError(f"basis payload must be an integer, got {self.payload!r}")
            if not 0 <= self.payload <= 3:
                raise EncodingError(f"basis payload {self.payload} outside [0, 3]")
            object.__setattr__(self, "payload", int(self.payload))
            return
        values = tuple(float(v) for v in np.ravel(self.payload))
        if len(values) != 4:
            raise EncodingError(f"{method.value} payload needs 4 values, got {len(values)}")
        if not all(math.isfinite(v) for v in values):
            raise EncodingError(f"non-finite value in {values}")
        if method is EncodingMethod.ROTATION:
            if any(not 0.0 <= v < 2 * math.pi for v in values):
                raise EncodingError(f"rotation angles must lie in [0, 2*pi): {values}")
        elif math.sqrt(sum(v * v for v in values)) <= 1e-12:
            raise EncodingError("amplitude payload has zero norm")
        object.__setattr__(self, "payload", values)

    def fragment(self, qubits: Sequence[int]) -> List[GateOp]:
        if self.method is EncodingMethod.BASIS:
            return basis_encode(self.payload, len(qubits), qubits)
        if self.method is EncodingMethod.ROTATION:
            return rotation_encode(self.payload, qubits)
        return amplitude_encode(self.payload, qubits)


def basis_encode(value: int, num_qubits: int, qubits: Sequence[int] = None) -> List[GateOp]:
    """X gates on the qubits whose binary digit of ``value`` is 1.

    Digit k (weight 2**k) lands on ``qubits[k]``; by default qubit k.
    """
    if qubits is None:
        qubits = range(num_qubits)
    qubits = list(qubits)
    if len(qubits) != num_qubits:
        raise EncodingError(f"got {len(qubits)} target qubits for {num_qubits}-qubit encoding")
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise EncodingError(f"basis value must be an integer, got {value!r}")
    if not 0 <= value < 1 << num_qubits:
        raise EncodingError(f"value {value} does not fit in {num_qubits} qubits")
    return [x(q) for k, q in enumerate(qubits) if (value >> k) & 1]


def rotation_encode(angles: Sequence[float], qubits: Sequence[int]) -> List[GateOp]:
    """RY, RZ on the first qubit then RY, RZ on the second."""
    angles = [float(a) for a in np.ravel(angles)]
    if len(angles) != 4:
        raise EncodingError(f"rotation encoding takes 4 angles, got {len(angles)}")
    if len(qubits) != 2:
        raise EncodingError(f"rotation encoding targets 2 qubits, got {len(qubits)}")
    qa, qb = qubits
    return [ry(qa, angles[0]), rz(qa, angles[1]), ry(qb, angles[2]), rz(qb, angles[3])]


def amplitude_encode(values: Sequence[float], qubits: Sequence[int]) -> List[GateOp]:
    """Prepare sum_i x_i/|x| |i> on two qubits (``qubits[0]`` is the low bit).

    Magnitudes come from an RY on the high qubit followed by two
    controlled-RY on the low qubit (the first one controlled on hi=0 by X
    conjugation). Negative components are then fixed with Z/CZ phase flips.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size != 4:
        raise EncodingError(f"amplitude encoding takes 4 values, got {v.size}")
    if len(qubits) != 2:
        raise EncodingError(f"amplitude encoding targets 2 qubits, got {len(qubits)}")
    norm = float(np.linalg.norm(v))
    if not norm > 1e-12:
        raise EncodingError("cannot amplitude-encode a zero vector")
    lo, hi = qubits
    a = np.abs(v) / norm
    # high bit splits {0,1} from {2,3}
    top = 2.0 * math.atan2(math.hypot(a[2], a[3]), math.hypot(a[0], a[1]))
    left = 2.0 * math.atan2(a[1], a[0])
    right = 2.0 * math.atan2(a[3], a[2])
    ops: List[GateOp] = []
    if top != 0.0:
        ops.append(ry(hi, top))
    # control on hi=0 via X conjugation
    if left != 0.0:
        ops += [x(hi), cry(hi, lo, left), x(hi)]
    if right != 0.0:
        ops.append(cry(hi, lo, right))
    ops += _sign_fix(np.signbit(v) & (v != 0), lo, hi)
    return ops


def _sign_fix(negative: np.ndarray, lo: int, hi: int) -> List[GateOp]:
    """Diagonal sign pattern on |0>..|3> as Z_lo^a Z_hi^b CZ^c, up to global sign."""
    s = np.where(negative, -1, 1)
    if s[0] == -1:
        s = -s
    a = s[1] == -1
    b = s[2] == -1
    c = (s[3] == -1) != (a != b)
    ops: List[GateOp] = []
    if a:
        ops.append(z(lo))
    if b:
        ops.append(z(hi))
    if c:
        ops.append(cz(hi, lo))
    return ops


def qubit_cost(method, n_points: int, bits_per_point: int = 1) -> int:
    method = EncodingMethod.parse(method)
    if n_points < 1:
        raise EncodingError(f"n_points must be >= 1, got {n_points}")
    if method is EncodingMethod.BASIS:
        if bits_per_point < 1:
            raise EncodingError(f"bits_per_point must be >= 1, got {bits_per_point}")
        return n_points * bits_per_point
    if method is EncodingMethod.ROTATION:
        return n_points
    if n_points & (n_points - 1):
        raise EncodingError(f"amplitude encoding needs a power-of-2 point count, got {n_points}")
    return n_points.bit_length() - 1
