"""Dense statevector and density-matrix simulation.

Qubit 0 is the least significant bit of the basis-state index, so the
basis state |q4 q3 q2 q1 q0> has index sum(q_k << k).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DimensionError

MAX_QUBITS = 12

ONE_QUBIT_KINDS = {"H", "X", "Y", "Z", "RX", "RY", "RZ"}
CONTROLLED_KINDS = {"CNOT", "CZ", "CRY"}
PARAMETRIC_KINDS = {"RX", "RY", "RZ", "CRY"}
ALL_KINDS = ONE_QUBIT_KINDS | CONTROLLED_KINDS | {"CSWAP", "IDLE"}
_ARITY = {**{k: 1 for k in ONE_QUBIT_KINDS}, **{k: 2 for k in CONTROLLED_KINDS}, "CSWAP": 3, "IDLE": 1}

_SQRT_HALF = 1.0 / np.sqrt(2.0)
_FIXED = {
    "H": np.array([[1, 1], [1, -1]], dtype=np.complex128) * _SQRT_HALF,
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


@dataclass(frozen=True)
class GateOp:
    """One circuit operation.

    For controlled kinds the first qubit is the control. ``param_index``
    tags gates whose angle is a trainable model parameter; the simulator
    ignores it.
    """

    kind: str
    qubits: Tuple[int, ...]
    theta: Optional[float] = None
    duration: float = 0.0
    param_index: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ConfigError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != _ARITY[self.kind]:
            raise DimensionError(f"{self.kind} acts on {_ARITY[self.kind]} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise DimensionError(f"repeated qubit in {self.kind}{self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise DimensionError(f"negative qubit index in {self.qubits}")
        if self.kind in PARAMETRIC_KINDS and self.theta is None:
            raise ConfigError(f"{self.kind} needs an angle")
        if self.kind == "IDLE" and not self.duration >= 0:
            raise ConfigError(f"IDLE duration must be nonnegative, got {self.duration}")

    def shifted(self, delta: float) -> "GateOp":
        return replace(self, theta=self.theta + delta)

    def __str__(self):
        args = ",".join(map(str, self.qubits))
        if self.kind == "IDLE":
            return f"IDLE({args}; {self.duration:g})"
        if self.theta is not None:
            return f"{self.kind}({self.theta:.6g}) {args}"
        return f"{self.kind} {args}"


def h(q): return GateOp("H", (q,))
def x(q): return GateOp("X", (q,))
def y(q): return GateOp("Y", (q,))
def z(q): return GateOp("Z", (q,))
def rx(q, theta, param_index=None): return GateOp("RX", (q,), float(theta), param_index=param_index)
def ry(q, theta, param_index=None): return GateOp("RY", (q,), float(theta), param_index=param_index)
def rz(q, theta, param_index=None): return GateOp("RZ", (q,), float(theta), param_index=param_index)
def cnot(c, t): return GateOp("CNOT", (c, t))
def cz(c, t): return GateOp("CZ", (c, t))
def cry(c, t, theta, param_index=None): return GateOp("CRY", (c, t), float(theta), param_index=param_index)
def cswap(c, a, b): return GateOp("CSWAP", (c, a, b))
def idle(q, duration): return GateOp("IDLE", (q,), duration=float(duration))


def _base_matrix(gate: GateOp) -> np.ndarray:
    """2x2 matrix of a 1-qubit gate, or of the target action of a controlled gate."""
    kind = gate.kind
    if kind in _FIXED:
        return _FIXED[kind]
    if kind == "CNOT":
        return _FIXED["X"]
    if kind == "CZ":
        return _FIXED["Z"]
    t = gate.theta / 2.0
    c, s = np.cos(t), np.sin(t)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if kind in ("RY", "CRY"):
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if kind == "RZ":
        return np.array([[np.exp(-1j * t), 0], [0, np.exp(1j * t)]], dtype=np.complex128)
    raise ConfigError(f"{kind} has no 2x2 matrix")


def gate_matrix(gate: GateOp) -> np.ndarray:
    """Local unitary of ``gate`` on its own qubits.

    The local index uses the same little-endian rule as the global one:
    ``gate.qubits[k]`` is bit k.
    """
    kind = gate.kind
    if kind == "IDLE":
        return np.eye(2, dtype=np.complex128)
    if kind in ONE_QUBIT_KINDS:
        return _base_matrix(gate)
    if kind in CONTROLLED_KINDS:
        u = np.eye(4, dtype=np.complex128)
        # control is bit 0, target bit 1: control=1 rows are indices 1 and 3
        sub = _base_matrix(gate)
        u[np.ix_([1, 3], [1, 3])] = sub
        return u
    u = np.zeros((8, 8), dtype=np.complex128)
    for i in range(8):
        j = i
        if i & 1 and ((i >> 1) & 1) != ((i >> 2) & 1):
            j = i ^ 0b110
        u[j, i] = 1.0
    return u


@dataclass
class Circuit:
    num_qubits: int
    ops: List[GateOp] = field(default_factory=list)

    def __post_init__(self):
        _check_num_qubits(self.num_qubits)
        for op in self.ops:
            _check_qubits(op, self.num_qubits)

    def append(self, op: GateOp) -> "Circuit":
        _check_qubits(op, self.num_qubits)
        self.ops.append(op)
        return self

    def extend(self, ops: Iterable[GateOp]) -> "Circuit":
        for op in ops:
            self.append(op)
        return self

    def gates(self) -> List[GateOp]:
        return [op for op in self.ops if op.kind != "IDLE"]

    def with_idle_markers(self) -> "Circuit":
        """ASAP-schedule the gates into moments and mark idle windows.

        Whenever a qubit sits untouched between two of its own gates, an
        IDLE op with duration equal to the number of skipped moments is
        placed before the later gate. Existing IDLE ops are dropped first.
        """
        free_at = [0] * self.num_qubits
        last_used = [None] * self.num_qubits
        out: List[GateOp] = []
        for op in self.gates():
            moment = max(free_at[q] for q in op.qubits)
            for q in op.qubits:
                if last_used[q] is not None and moment - free_at[q] > 0:
                    out.append(idle(q, moment - free_at[q]))
            out.append(op)
            for q in op.qubits:
                free_at[q] = moment + 1
                last_used[q] = moment
        return Circuit(self.num_qubits, out)

    def depth(self) -> int:
        free_at = [0] * self.num_qubits
        for op in self.gates():
            moment = max(free_at[q] for q in op.qubits)
            for q in op.qubits:
                free_at[q] = moment + 1
        return max(free_at) if free_at else 0

    def __len__(self):
        return len(self.ops)

    def __str__(self):
        return "\n".join(str(op) for op in self.ops)


def _check_num_qubits(n):
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_QUBITS:
        raise ConfigError(f"num_qubits must be an integer in [1, {MAX_QUBITS}], got {n!r}")


def _check_qubits(op: GateOp, n: int):
    for q in op.qubits:
        if q >= n:
            raise DimensionError(f"{op.kind} on qubit {q} but circuit has {n} qubits")


def _check_qubit(qubit: int, n: int):
    if not 0 <= qubit < n:
        raise DimensionError(f"qubit {qubit} out of range for {n} qubits")


class StateVector:
    """Pure state of ``num_qubits`` qubits as 2**n complex amplitudes."""

    __slots__ = ("num_qubits", "amplitudes")

    def __init__(self, num_qubits: int, amplitudes, check: bool = True):
        _check_num_qubits(num_qubits)
        amps = np.asarray(amplitudes, dtype=np.complex128)
        if amps.shape != (1 << num_qubits,):
            raise DimensionError(f"expected {1 << num_qubits} amplitudes, got shape {amps.shape}")
        if check:
            norm = np.vdot(amps, amps).real
            if abs(norm - 1.0) > 1e-10:
                raise DimensionError(f"state is not normalized (norm^2 = {norm!r})")
        self.num_qubits = int(num_qubits)
        self.amplitudes = amps

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=np.complex128)
        n = int(round(np.log2(amps.size)))
        if 1 << n != amps.size:
            raise DimensionError(f"length {amps.size} is not a power of two")
        return cls(n, amps)

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __repr__(self):
        return f"StateVector({self.num_qubits}, {np.array2string(self.amplitudes, precision=4)})"


class DensityMatrix:
    """Mixed state as a 2**n x 2**n complex matrix."""

    __slots__ = ("num_qubits", "entries")

    def __init__(self, num_qubits: int, entries, check: bool = True):
        _check_num_qubits(num_qubits)
        rho = np.asarray(entries, dtype=np.complex128)
        dim = 1 << num_qubits
        if rho.shape != (dim, dim):
            raise DimensionError(f"expected {dim}x{dim} matrix, got shape {rho.shape}")
        self.num_qubits = int(num_qubits)
        self.entries = rho
        if check:
            self.validate()

    def validate(self, tol: float = 1e-10, eig_tol: float = 1e-9):
        rho = self.entries
        if np.max(np.abs(rho - rho.conj().T)) > tol:
            raise DimensionError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > tol:
            raise DimensionError(f"density matrix trace is {np.trace(rho)!r}")
        if np.linalg.eigvalsh(rho).min() < -eig_tol:
            raise DimensionError("density matrix has a negative eigenvalue")

    @classmethod
    def maximally_mixed(cls, num_qubits: int) -> "DensityMatrix":
        dim = 1 << num_qubits
        return cls(num_qubits, np.eye(dim, dtype=np.complex128) / dim)

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def purity(self) -> float:
        return float(np.real(np.vdot(self.entries, self.entries)))

    def reduced(self, keep: Sequence[int]) -> np.ndarray:
        """Partial trace onto ``keep``; ``keep[k]`` becomes local bit k."""
        n = self.num_qubits
        for q in keep:
            _check_qubit(q, n)
        t = self.entries.reshape((2,) * (2 * n))
        rows = list(range(n))
        cols = [n + j if _axis_qubit(j, n) in keep else j for j in range(n)]
        out_rows = [_axis(q, n) for q in reversed(keep)]
        out = out_rows + [n + a for a in out_rows]
        d = 1 << len(keep)
        return np.einsum(t, rows + cols, out).reshape(d, d)

    def __repr__(self):
        return f"DensityMatrix({self.num_qubits} qubits, trace={self.trace():.6g})"


def zero_state(num_qubits: int) -> StateVector:
    _check_num_qubits(num_qubits)
    amps = np.zeros(1 << num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(num_qubits, amps, check=False)


def _axis(q: int, n: int) -> int:
    # C-order reshape puts the most significant bit on axis 0
    return n - 1 - q


def _axis_qubit(axis: int, n: int) -> int:
    return n - 1 - axis


def _apply_1q(psi: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    # pairs of indices differing only in bit q: view as (high, bit, low)
    v = psi.reshape(1 << (n - q - 1), 2, 1 << q)
    return np.matmul(u, v).reshape(-1)


def _control_mask(n: int, c: int) -> np.ndarray:
    return (np.arange(1 << n) >> c) & 1 == 1


_CSWAP_PERMS = {}


def _cswap_perm(n: int, c: int, a: int, b: int) -> np.ndarray:
    key = (n, c, a, b)
    perm = _CSWAP_PERMS.get(key)
    if perm is None:
        idx = np.arange(1 << n)
        ctrl = (idx >> c) & 1
        differ = ((idx >> a) & 1) != ((idx >> b) & 1)
        perm = np.where((ctrl == 1) & differ, idx ^ ((1 << a) | (1 << b)), idx)
        _CSWAP_PERMS[key] = perm
    return perm


def _apply_to_vector(psi: np.ndarray, gate: GateOp, n: int) -> np.ndarray:
    kind = gate.kind
    if kind == "IDLE":
        return psi.copy()
    if kind in ONE_QUBIT_KINDS:
        return _apply_1q(psi, _base_matrix(gate), gate.qubits[0], n)
    if kind in CONTROLLED_KINDS:
        c, t = gate.qubits
        u = _base_matrix(gate)
        out = psi.copy()
        sub = _apply_1q(psi, u, t, n)
        mask = _control_mask(n, c)
        out[mask] = sub[mask]
        return out
    c, a, b = gate.qubits
    return psi[_cswap_perm(n, c, a, b)]


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    _check_qubits(gate, state.num_qubits)
    amps = _apply_to_vector(state.amplitudes, gate, state.num_qubits)
    return StateVector(state.num_qubits, amps, check=False)


def run_circuit(circuit: Circuit, initial: Optional[StateVector] = None) -> StateVector:
    if initial is None:
        initial = zero_state(circuit.num_qubits)
    if initial.num_qubits != circuit.num_qubits:
        raise DimensionError(
            f"circuit has {circuit.num_qubits} qubits, state has {initial.num_qubits}"
        )
    n = circuit.num_qubits
    psi = initial.amplitudes
    for op in circuit.ops:
        if op.kind != "IDLE":
            psi = _apply_to_vector(psi, op, n)
    if psi is initial.amplitudes:
        psi = psi.copy()
    return StateVector(n, psi, check=False)


def measure_probability(state: StateVector, qubit: int, outcome: int) -> float:
    _check_qubit(qubit, state.num_qubits)
    if outcome not in (0, 1):
        raise DimensionError(f"outcome must be 0 or 1, got {outcome!r}")
    n = state.num_qubits
    probs = np.abs(state.amplitudes.reshape(1 << (n - qubit - 1), 2, 1 << qubit)[:, outcome, :]) ** 2
    return float(probs.sum())


def to_density(state: StateVector) -> DensityMatrix:
    a = state.amplitudes
    return DensityMatrix(state.num_qubits, np.outer(a, a.conj()), check=False)


def apply_local_operator(rho: np.ndarray, op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Return ``O rho O^dagger`` for a k-qubit local operator ``O``."""
    k = len(qubits)
    t = rho.reshape((2,) * (2 * n))
    o = op.reshape((2,) * (2 * k))
    # local axis j of o corresponds to qubit qubits[k-1-j]
    row_axes = [_axis(qubits[k - 1 - j], n) for j in range(k)]
    col_axes = [a + n for a in row_axes]
    t = np.tensordot(o, t, axes=(list(range(k, 2 * k)), row_axes))
    t = np.moveaxis(t, list(range(k)), row_axes)
    t = np.tensordot(o.conj(), t, axes=(list(range(k, 2 * k)), col_axes))
    t = np.moveaxis(t, list(range(k)), col_axes)
    return t.reshape(1 << n, 1 << n)


def apply_gate_density(rho: DensityMatrix, gate: GateOp) -> DensityMatrix:
    _check_qubits(gate, rho.num_qubits)
    n = rho.num_qubits
    if gate.kind == "IDLE":
        return DensityMatrix(n, rho.entries.copy(), check=False)
    if gate.kind == "CSWAP":
        perm = _cswap_perm(n, *gate.qubits)
        return DensityMatrix(n, rho.entries[np.ix_(perm, perm)], check=False)
    out = apply_local_operator(rho.entries, gate_matrix(gate), gate.qubits, n)
    return DensityMatrix(n, out, check=False)


def measure_probability_density(rho: DensityMatrix, qubit: int, outcome: int) -> float:
    _check_qubit(qubit, rho.num_qubits)
    if outcome not in (0, 1):
        raise DimensionError(f"outcome must be 0 or 1, got {outcome!r}")
    diag = np.real(np.diag(rho.entries))
    mask = ((np.arange(diag.size) >> qubit) & 1) == outcome
    return float(diag[mask].sum())


def run_circuit_density(circuit: Circuit, initial: Optional[DensityMatrix] = None) -> DensityMatrix:
    """Noiseless density-matrix replay; IDLE ops are no-ops."""
    rho = initial if initial is not None else to_density(zero_state(circuit.num_qubits))
    if rho.num_qubits != circuit.num_qubits:
        raise DimensionError(
            f"circuit has {circuit.num_qubits} qubits, state has {rho.num_qubits}"
        )
    for op in circuit.ops:
        rho = apply_gate_density(rho, op)
    return rho


def _batched_base(kind: str, thetas: np.ndarray) -> np.ndarray:
    """(B, 2, 2) matrices for a parametric kind, or one (2, 2) for a fixed kind."""
    if kind in _FIXED or kind in ("CNOT", "CZ"):
        return _base_matrix(GateOp(kind, (0,) if kind in _FIXED else (0, 1)))
    half = thetas / 2.0
    c, s = np.cos(half), np.sin(half)
    out = np.zeros((thetas.size, 2, 2), dtype=np.complex128)
    if kind == "RX":
        out[:, 0, 0] = c
        out[:, 1, 1] = c
        out[:, 0, 1] = -1j * s
        out[:, 1, 0] = -1j * s
    elif kind in ("RY", "CRY"):
        out[:, 0, 0] = c
        out[:, 1, 1] = c
        out[:, 0, 1] = -s
        out[:, 1, 0] = s
    else:
        out[:, 0, 0] = np.exp(-1j * half)
        out[:, 1, 1] = np.exp(1j * half)
    return out


def _structure(circuit: Circuit) -> tuple:
    return tuple((op.kind, op.qubits) for op in circuit.ops if op.kind != "IDLE")


def simulate_batch(circuits: Sequence[Circuit]) -> np.ndarray:
    """Final amplitudes of many circuits started from |0...0>, shape (B, 2**n).

    Circuits sharing a gate structure (kinds and qubits, angles free) are
    simulated together with one vectorised pass per gate.
    """
    if not circuits:
        return np.zeros((0, 0), dtype=np.complex128)
    n = circuits[0].num_qubits
    if any(c.num_qubits != n for c in circuits):
        raise DimensionError("batched circuits must share a qubit count")
    groups = {}
    for i, c in enumerate(circuits):
        groups.setdefault(_structure(c), []).append(i)
    out = np.empty((len(circuits), 1 << n), dtype=np.complex128)
    for structure, members in groups.items():
        gate_lists = [circuits[i].gates() for i in members]
        b = len(members)
        psi = np.zeros((b, 1 << n), dtype=np.complex128)
        psi[:, 0] = 1.0
        for k, (kind, qubits) in enumerate(structure):
            if kind == "CSWAP":
                psi = psi[:, _cswap_perm(n, *qubits)]
                continue
            if kind in PARAMETRIC_KINDS:
                u = _batched_base(kind, np.array([g[k].theta for g in gate_lists]))
            else:
                u = _batched_base(kind, None)
            t = qubits[-1]
            v = psi.reshape(b, 1 << (n - t - 1), 2, 1 << t)
            if u.ndim == 2:
                sub = np.matmul(u, v)
            else:
                sub = np.matmul(u[:, None, :, :], v)
            sub = sub.reshape(b, -1)
            if kind in CONTROLLED_KINDS:
                mask = _control_mask(n, qubits[0])
                psi = psi.copy()
                psi[:, mask] = sub[:, mask]
            else:
                psi = sub
        out[members] = psi
    return out


def ancilla_probabilities(amplitudes: np.ndarray, qubit: int, outcome: int = 0) -> np.ndarray:
    """P(outcome) on ``qubit`` for each row of a (B, 2**n) amplitude batch."""
    n = int(amplitudes.shape[1]).bit_length() - 1
    _check_qubit(qubit, n)
    mask = ((np.arange(amplitudes.shape[1]) >> qubit) & 1) == outcome
    return np.sum(np.abs(amplitudes[:, mask]) ** 2, axis=1)
