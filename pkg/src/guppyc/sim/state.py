"""Seeded statevector backend."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_S2 = 1 / math.sqrt(2)

GATES: dict[str, np.ndarray] = {
    "h": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "z": np.diag([1, -1]).astype(complex),
    "t": np.diag([1, np.exp(1j * math.pi / 4)]),
    "tdg": np.diag([1, np.exp(-1j * math.pi / 4)]),
    "cx": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "zz": np.diag([1, -1, -1, 1]).astype(complex),
}


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


@dataclass(frozen=True)
class QubitHandle:
    """A live qubit; ``id`` counts allocations over the whole run."""

    id: int


class QuantumState:
    """Amplitudes over the live qubits, one tensor axis per qubit in allocation order."""

    def __init__(self, seed: int):
        self.amps = np.ones((), dtype=complex)
        self.order: list[int] = []
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.allocated = 0
        self.max_norm_deviation = 0.0

    @property
    def n(self) -> int:
        return len(self.order)

    def _check_norm(self) -> None:
        dev = abs(float(np.vdot(self.amps, self.amps).real) - 1.0)
        if dev > self.max_norm_deviation:
            self.max_norm_deviation = dev

    def alloc(self, alpha: complex = 1.0, beta: complex = 0.0) -> QubitHandle:
        vec = np.array([alpha, beta], dtype=complex)
        vec /= np.linalg.norm(vec)
        self.amps = np.multiply.outer(self.amps, vec)
        h = QubitHandle(self.allocated)
        self.allocated += 1
        self.order.append(h.id)
        self._check_norm()
        return h

    def axis(self, h: QubitHandle) -> int:
        try:
            return self.order.index(h.id)
        except ValueError:
            raise AssertionError(f"qubit {h.id} is not live") from None

    def apply(self, u: np.ndarray, *qubits: QubitHandle) -> None:
        axes = [self.axis(q) for q in qubits]
        if len(set(axes)) != len(axes):
            raise AssertionError("duplicate qubit operand")
        k = len(axes)
        tensor = u.reshape((2,) * (2 * k))
        out = np.tensordot(tensor, self.amps, axes=(list(range(k, 2 * k)), axes))
        self.amps = np.moveaxis(out, list(range(k)), axes)
        self._check_norm()

    def measure(self, q: QubitHandle) -> bool:
        """Projective Z measurement with one rng draw; the qubit is removed."""
        a = self.axis(q)
        one = np.take(self.amps, 1, axis=a)
        p1 = min(1.0, float(np.vdot(one, one).real))
        bit = bool(self.rng.random() < p1)
        kept = one if bit else np.take(self.amps, 0, axis=a)
        p = p1 if bit else 1.0 - p1
        self.amps = kept / math.sqrt(p)
        del self.order[a]
        self._check_norm()
        return bit

    def vector(self, qubits: list[QubitHandle]) -> np.ndarray:
        """Amplitudes over ``qubits`` (first is most significant); they must be all live qubits."""
        if sorted(q.id for q in qubits) != sorted(self.order):
            raise ValueError("state vector requested over a subset of the live qubits")
        axes = [self.axis(q) for q in qubits]
        return np.transpose(self.amps, axes).reshape(-1) if qubits else self.amps.reshape(1)


def step_quantum(state: QuantumState, op: str, *operands, angle: float | None = None):
    """Apply one quantum operation; returns the op's outputs (handles or the measured bit)."""
    if op == "qalloc":
        return (state.alloc(),)
    if op == "measure":
        return (state.measure(operands[0]),)
    if op == "discard":
        state.measure(operands[0])
        return ()
    if op == "rz":
        if angle is None:
            raise TypeError("rz needs an angle")
        state.apply(rz(angle), *operands)
    else:
        state.apply(GATES[op], *operands)
    return operands
