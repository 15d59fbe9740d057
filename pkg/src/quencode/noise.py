"""Parametric noise channels and dynamical-decoupling insertion.

Gates are followed by a depolarizing channel on the qubits they touch.
IDLE windows of duration d get amplitude damping, phase damping and a
coherent RZ(rate * d), all per qubit.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
import math
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import ConfigError, PolicyError
from .simcore import (
    Circuit,
    DensityMatrix,
    GateOp,
    _base_matrix,
    apply_gate_density,
    apply_local_operator,
    idle,
    measure_probability_density,
    to_density,
    zero_state,
)

_PAULIS = [
    np.eye(2, dtype=np.complex128),
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
]


@dataclass(frozen=True)
class NoiseConfig:
    p_depol_1q: float = 0.0
    p_depol_2q: float = 0.0
    gamma_amp: float = 0.0
    gamma_phase: float = 0.0
    coherent_z_rate: float = 0.0
    readout_flip: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"noise field {f.name} must be a finite number, got {v!r}")
            if f.name != "coherent_z_rate" and not 0.0 <= v <= 1.0:
                raise ConfigError(f"noise probability {f.name}={v} outside [0, 1]")
            object.__setattr__(self, f.name, float(v))

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in asdict(self).values())

    def with_overrides(self, **overrides) -> "NoiseConfig":
        unknown = set(overrides) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown noise fields {sorted(unknown)}")
        return NoiseConfig(**{**asdict(self), **overrides})


PRESETS: Dict[str, NoiseConfig] = {
    "none": NoiseConfig(),
    "torino_like": NoiseConfig(
        p_depol_1q=0.001, p_depol_2q=0.01, gamma_amp=0.002, gamma_phase=0.004,
        coherent_z_rate=0.02, readout_flip=0.01,
    ),
    "legacy_like": NoiseConfig(
        p_depol_1q=0.01, p_depol_2q=0.1, gamma_amp=0.02, gamma_phase=0.04,
        coherent_z_rate=0.2, readout_flip=0.1,
    ),
    "coherent_idle": NoiseConfig(coherent_z_rate=0.5),
}


def preset(name: str, **overrides) -> NoiseConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown noise preset {name!r}; choose from {sorted(PRESETS)}") from None
    return base.with_overrides(**overrides) if overrides else base


@dataclass(frozen=True)
class DDPolicy:
    enabled: bool = True
    sequence: Tuple[str, ...] = ("X", "X")
    min_idle_duration: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "sequence", tuple(s.upper() for s in self.sequence))
        if self.enabled:
            self.check()

    def check(self):
        if not self.sequence:
            raise PolicyError("DD sequence is empty")
        u = np.eye(2, dtype=np.complex128)
        for kind in self.sequence:
            try:
                g = GateOp(kind, (0,))
            except Exception:
                raise PolicyError(f"DD pulse {kind!r} must be a fixed 1-qubit gate") from None
            if g.kind not in ("X", "Y", "Z", "H"):
                raise PolicyError(f"DD pulse {kind!r} must be a fixed 1-qubit gate")
            u = _base_matrix(g) @ u
        # identity up to a global phase
        phase = u[0, 0]
        if abs(abs(phase) - 1) > 1e-10 or np.max(np.abs(u - phase * np.eye(2))) > 1e-10:
            raise PolicyError(f"DD sequence {self.sequence} does not compose to identity")


@dataclass(frozen=True)
class KrausSet:
    qubits: Tuple[int, ...]
    operators: Tuple[np.ndarray, ...]

    def completeness_error(self) -> float:
        d = self.operators[0].shape[0]
        acc = sum(k.conj().T @ k for k in self.operators)
        return float(np.max(np.abs(acc - np.eye(d))))

    def is_identity(self) -> bool:
        return len(self.operators) == 1 and np.allclose(self.operators[0], np.eye(self.operators[0].shape[0]))


@lru_cache(maxsize=None)
def _pauli_strings(k: int) -> Tuple[np.ndarray, ...]:
    out = []
    for combo in itertools.product(range(4), repeat=k):
        m = np.ones((1, 1), dtype=np.complex128)
        # combo[j] acts on local bit j; kron puts the first factor on the high bit
        for j in reversed(range(k)):
            m = np.kron(m, _PAULIS[combo[j]])
        out.append(m)
    return tuple(out)


def depolarizing_kraus(p: float, k: int) -> List[np.ndarray]:
    """rho -> (1 - p) rho + p * I/2**k (x) Tr_k(rho), as 4**k Pauli operators."""
    d2 = 4 ** k
    if p == 0.0:
        return [np.eye(2 ** k, dtype=np.complex128)]
    paulis = _pauli_strings(k)
    ops = [math.sqrt(1.0 - p * (d2 - 1) / d2) * paulis[0]]
    ops += [math.sqrt(p / d2) * m for m in paulis[1:]]
    return ops


def amplitude_damping_kraus(gamma: float) -> List[np.ndarray]:
    return [
        np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=np.complex128),
        np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=np.complex128),
    ]


def phase_damping_kraus(lam: float) -> List[np.ndarray]:
    return [
        np.array([[1, 0], [0, math.sqrt(1 - lam)]], dtype=np.complex128),
        np.array([[0, 0], [0, math.sqrt(lam)]], dtype=np.complex128),
    ]


def _compose(first: Sequence[np.ndarray], second: Sequence[np.ndarray]) -> List[np.ndarray]:
    return [b @ a for a in first for b in second]


def _prune(ops: Sequence[np.ndarray]) -> List[np.ndarray]:
    kept = [k for k in ops if np.max(np.abs(k)) > 1e-15]
    return kept or [np.eye(ops[0].shape[0], dtype=np.complex128)]


def idle_kraus(config: NoiseConfig, duration: float) -> List[np.ndarray]:
    gamma = 1.0 - (1.0 - config.gamma_amp) ** duration
    lam = 1.0 - (1.0 - config.gamma_phase) ** duration
    theta = config.coherent_z_rate * duration
    ops = _prune(amplitude_damping_kraus(gamma))
    ops = _prune(_compose(ops, _prune(phase_damping_kraus(lam))))
    if theta != 0.0:
        rot = np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
        ops = [rot @ k for k in ops]
    return ops


def kraus_for(config: NoiseConfig, gate: GateOp) -> KrausSet:
    """Kraus operators of the noise channel that follows ``gate``."""
    if gate.kind == "IDLE":
        ops = idle_kraus(config, gate.duration)
    else:
        k = len(gate.qubits)
        ops = depolarizing_kraus(config.p_depol_1q if k == 1 else config.p_depol_2q, k)
    kset = KrausSet(gate.qubits, tuple(ops))
    err = kset.completeness_error()
    assert err <= 1e-10, f"Kraus set for {gate} violates completeness by {err:.3g}"
    return kset


def apply_channel(rho: DensityMatrix, kset: KrausSet) -> DensityMatrix:
    if kset.is_identity():
        return rho
    n = rho.num_qubits
    acc = np.zeros_like(rho.entries)
    for k in kset.operators:
        acc += apply_local_operator(rho.entries, k, kset.qubits, n)
    return DensityMatrix(n, acc, check=False)


def _depolarize(rho: DensityMatrix, p: float, qubits: Sequence[int]) -> DensityMatrix:
    """Closed form of ``depolarizing_kraus``: mix toward I/2**k on ``qubits``."""
    n = rho.num_qubits
    k = len(qubits)
    gate_axes = [n - 1 - q for q in qubits]
    rest_axes = [a for a in range(n) if a not in gate_axes]
    perm = rest_axes + gate_axes + [a + n for a in rest_axes] + [a + n for a in gate_axes]
    d, rest = 1 << k, 1 << (n - k)
    t = rho.entries.reshape((2,) * (2 * n)).transpose(perm).reshape(rest, d, rest, d)
    reduced = np.einsum("aibi->ab", t)
    mixed = np.einsum("ab,ij->aibj", reduced, np.eye(d) / d)
    mixed = mixed.reshape((2,) * (2 * n)).transpose(np.argsort(perm)).reshape(rho.entries.shape)
    return DensityMatrix(n, (1.0 - p) * rho.entries + p * mixed, check=False)


def run_noisy(circuit: Circuit, config: NoiseConfig, initial: DensityMatrix = None,
              exact_kraus: bool = False) -> DensityMatrix:
    """Density-matrix replay with a noise channel after every op.

    Depolarizing channels use their closed form unless ``exact_kraus``
    is set, in which case every channel is applied through its Kraus
    operators.
    """
    rho = initial if initial is not None else to_density(zero_state(circuit.num_qubits))
    for op in circuit.ops:
        if op.kind != "IDLE":
            rho = apply_gate_density(rho, op)
            p = config.p_depol_1q if len(op.qubits) == 1 else config.p_depol_2q
            if p == 0.0:
                continue
            if not exact_kraus:
                rho = _depolarize(rho, p, op.qubits)
                continue
        rho = apply_channel(rho, kraus_for(config, op))
    return rho


def insert_dd(circuit: Circuit, policy: DDPolicy) -> Circuit:
    """Split each long-enough IDLE window around the policy's pulse train.

    A window of duration d with a k-pulse sequence becomes
    IDLE(d/k), P1, IDLE(d/k), P2, ..., IDLE(d/k), Pk on the same qubit.
    """
    policy.check()
    if not policy.enabled:
        return Circuit(circuit.num_qubits, list(circuit.ops))
    k = len(policy.sequence)
    out: List[GateOp] = []
    for op in circuit.ops:
        if op.kind != "IDLE" or op.duration < policy.min_idle_duration or op.duration == 0:
            out.append(op)
            continue
        q = op.qubits[0]
        for kind in policy.sequence:
            out.append(idle(q, op.duration / k))
            out.append(GateOp(kind, (q,)))
    return Circuit(circuit.num_qubits, out)


def readout(p0: float, flip: float) -> float:
    return (1.0 - flip) * p0 + flip * (1.0 - p0)


@dataclass(frozen=True)
class NoisyBackend:
    """Density-matrix evaluation under ``config``, optionally with DD."""

    config: NoiseConfig
    dd: DDPolicy = field(default_factory=lambda: DDPolicy(enabled=False))

    @property
    def name(self) -> str:
        return "noisy+dd" if self.dd.enabled else "noisy"

    def ancilla_p0(self, circuit: Circuit) -> float:
        if self.dd.enabled:
            circuit = insert_dd(circuit, self.dd)
        rho = run_noisy(circuit, self.config)
        return readout(measure_probability_density(rho, 0, 0), self.config.readout_flip)

    def ancilla_p0_many(self, circuits: Sequence[Circuit], workers: int = 1) -> np.ndarray:
        if workers > 1:
            # map keeps input order, so results do not depend on scheduling
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return np.array(list(pool.map(self.ancilla_p0, circuits)))
        return np.array([self.ancilla_p0(c) for c in circuits])
