"""State-vector simulator for small qubit registers.

A register owns up to eight qubits. Qubit ``k`` is axis ``k`` of the amplitude
tensor, so in the flat amplitude list qubit 0 is the most significant bit.
Qubits are handed out fresh in ``|0>``; measuring a qubit collapses the state
and releases the handle for good.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from avowable.seeding import make_rng

MAX_QUBITS = 8
NORM_TOL = 1e-9

_SQRT_HALF = 1 / math.sqrt(2)
_register_ids = itertools.count()


class QuantumError(Exception):
    """Base class for simulator errors."""


class CapacityError(QuantumError):
    pass


class NormalizationError(QuantumError):
    pass


class ReleasedQubitError(QuantumError):
    pass


class RegisterMismatchError(QuantumError):
    pass


class PauliOp(enum.Enum):
    I = "I"
    X = "X"
    Y_TIMES_I = "iY"  # i*sigma_y = [[0, 1], [-1, 0]]
    Z = "Z"

    @property
    def matrix(self) -> np.ndarray:
        return _PAULI[self]


_PAULI = {
    PauliOp.I: np.eye(2, dtype=complex),
    PauliOp.X: np.array([[0, 1], [1, 0]], dtype=complex),
    PauliOp.Y_TIMES_I: np.array([[0, 1], [-1, 0]], dtype=complex),
    PauliOp.Z: np.array([[1, 0], [0, -1]], dtype=complex),
}

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT_HALF
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


class BellOutcome(enum.Enum):
    """Bell-basis result; the value is its fixed 2-bit code."""

    PHI_PLUS = 0b00
    PHI_MINUS = 0b01
    PSI_PLUS = 0b10
    PSI_MINUS = 0b11

    @property
    def bits(self) -> tuple[int, int]:
        return (self.value >> 1) & 1, self.value & 1

    @classmethod
    def from_bits(cls, hi: int, lo: int) -> "BellOutcome":
        return cls((int(hi) << 1) | int(lo))

    @property
    def vector(self) -> np.ndarray:
        return BELL_BASIS[:, self.value].copy()

    @property
    def correction(self) -> PauliOp:
        """Pauli mapping this Bell state to phi+ when applied to the first qubit
        (equivalently, undoing the teleportation byproduct on the target)."""
        return CORRECTIONS[self]


# Columns in enum order: phi+, phi-, psi+, psi-.
BELL_BASIS = np.array(
    [
        [1, 1, 0, 0],
        [0, 0, 1, 1],
        [0, 0, 1, -1],
        [1, -1, 0, 0],
    ],
    dtype=complex,
) * _SQRT_HALF

CORRECTIONS = {
    BellOutcome.PHI_PLUS: PauliOp.I,
    BellOutcome.PHI_MINUS: PauliOp.Z,
    BellOutcome.PSI_PLUS: PauliOp.X,
    BellOutcome.PSI_MINUS: PauliOp.Y_TIMES_I,
}

Z_BASIS = np.eye(2, dtype=complex)
X_BASIS = HADAMARD.copy()  # columns |+>, |->


class StateVector:
    """Amplitude register for 1..8 qubits with its own seeded Born-rule stream."""

    def __init__(self, num_qubits: int, seed: int = 0):
        if not isinstance(num_qubits, (int, np.integer)) or not 1 <= num_qubits <= MAX_QUBITS:
            raise CapacityError(f"num_qubits must be in 1..{MAX_QUBITS}, got {num_qubits!r}")
        self.num_qubits = int(num_qubits)
        self.register_id = next(_register_ids)
        self.seed = seed
        self.rng = make_rng(seed)
        self._psi = np.zeros((2,) * self.num_qubits, dtype=complex)
        self._psi[(0,) * self.num_qubits] = 1.0
        self._allocated = 0
        self._released: set[int] = set()

    @classmethod
    def from_amplitudes(cls, amplitudes: Sequence[complex], seed: int = 0) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        n = int(round(math.log2(len(amps)))) if len(amps) else 0
        if len(amps) != 2**n:
            raise ValueError(f"amplitude count {len(amps)} is not a power of two")
        reg = cls(n, seed)
        _require_normalized(amps)
        reg._psi = amps.reshape((2,) * n).copy()
        reg._allocated = n
        return reg

    def __repr__(self) -> str:
        return f"StateVector(num_qubits={self.num_qubits}, id={self.register_id})"

    @property
    def amplitudes(self) -> np.ndarray:
        return self._psi.reshape(-1).copy()

    def qubit(self, index: int) -> "QubitId":
        if not 0 <= index < self.num_qubits:
            raise IndexError(f"qubit index {index} out of range for {self.num_qubits} qubits")
        return QubitId(self, index)

    def allocate(self) -> "QubitId":
        """Hand out the next never-used qubit (still in |0>)."""
        if self._allocated >= self.num_qubits:
            raise CapacityError(f"register of {self.num_qubits} qubits exhausted")
        q = QubitId(self, self._allocated)
        self._allocated += 1
        return q

    def is_released(self, q: "QubitId") -> bool:
        return q.index in self._released

    # -- internals -------------------------------------------------------

    def _live(self, q: "QubitId") -> int:
        if q.register is not self:
            raise RegisterMismatchError(f"{q} does not belong to {self}")
        if q.index in self._released:
            raise ReleasedQubitError(f"{q} was measured and released")
        return q.index

    def _check(self) -> None:
        norm = float(np.vdot(self._psi, self._psi).real)
        if not math.isfinite(norm) or abs(norm - 1.0) > NORM_TOL:
            raise NormalizationError(f"state norm drifted to {norm!r}")

    def apply(self, gate: np.ndarray, *qubits: "QubitId") -> None:
        """Apply a 2^k x 2^k unitary to the given live qubits (first = most significant)."""
        axes = [self._live(q) for q in qubits]
        k = len(axes)
        g = np.asarray(gate, dtype=complex).reshape((2,) * (2 * k))
        moved = np.tensordot(g, self._psi, axes=(list(range(k, 2 * k)), axes))
        self._psi = np.moveaxis(moved, list(range(k)), axes)
        self._check()

    def project(
        self,
        qubits: Sequence["QubitId"],
        basis: np.ndarray,
        rng: np.random.Generator | None = None,
        release: bool = True,
    ) -> int:
        """Measure ``qubits`` in the orthonormal basis given by the columns of
        ``basis``; returns the column index of the outcome."""
        axes = [self._live(q) for q in qubits]
        if len(set(axes)) != len(axes):
            raise ValueError("cannot measure the same qubit twice in one projection")
        k = len(axes)
        front = np.moveaxis(self._psi, axes, list(range(k)))
        rest_shape = front.shape[k:]
        mat = front.reshape(2**k, -1)
        coeffs = basis.conj().T @ mat
        probs = np.einsum("ij,ij->i", coeffs.conj(), coeffs).real
        idx = _sample(probs, rng if rng is not None else self.rng)
        collapsed = np.outer(basis[:, idx], coeffs[idx]) / math.sqrt(probs[idx])
        front = collapsed.reshape((2,) * k + rest_shape)
        self._psi = np.moveaxis(front, list(range(k)), axes)
        self._check()
        if release:
            self._released.update(axes)
        return idx


def _sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    # Inverse CDF in fixed outcome order.
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return min(int(np.searchsorted(cdf, u, side="right")), len(probs) - 1)


def _require_normalized(amps: Iterable[complex]) -> None:
    vals = np.asarray(list(amps), dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise NormalizationError("amplitudes must be finite")
    norm = float(np.sum(np.abs(vals) ** 2))
    if abs(norm - 1.0) > NORM_TOL:
        raise NormalizationError(f"|alpha|^2 + |beta|^2 = {norm!r}, expected 1")


@dataclass(frozen=True)
class QubitId:
    register: StateVector
    index: int

    def __repr__(self) -> str:
        return f"QubitId(reg={self.register.register_id}, index={self.index})"


# -- public operations -------------------------------------------------------


def new_register(num_qubits: int, seed: int) -> StateVector:
    return StateVector(num_qubits, seed)


def prepare_single(q: QubitId, alpha: complex, beta: complex) -> None:
    """Put a fresh qubit into ``alpha|0> + beta|1>``."""
    alpha, beta = complex(alpha), complex(beta)
    _require_normalized([alpha, beta])
    reg = q.register
    axis = reg._live(q)
    p_one = float(np.sum(np.abs(np.take(reg._psi, 1, axis=axis)) ** 2))
    if p_one > NORM_TOL:
        raise QuantumError(f"{q} is not in |0> (P(1) = {p_one:.3g})")
    # Any unitary whose first column is (alpha, beta).
    u = np.array([[alpha, -beta.conjugate()], [beta, alpha.conjugate()]], dtype=complex)
    reg.apply(u, q)


def make_epr_pair(reg: StateVector) -> tuple[QubitId, QubitId]:
    """Allocate two fresh qubits and entangle them into (|00> + |11>)/sqrt(2)."""
    if reg._allocated + 2 > reg.num_qubits:
        raise CapacityError(f"register of {reg.num_qubits} qubits cannot fit another pair")
    a, b = reg.allocate(), reg.allocate()
    reg.apply(HADAMARD, a)
    reg.apply(CNOT, a, b)
    return a, b



def apply_pauli(op: PauliOp, q: QubitId) -> None:
    q.register.apply(op.matrix, q)


def measure_bell(q1: QubitId, q2: QubitId) -> BellOutcome:
    if q1.register is not q2.register:
        raise RegisterMismatchError("Bell measurement needs both qubits in one register")
    return BellOutcome(q1.register.project([q1, q2], BELL_BASIS))


def measure_z(q: QubitId) -> int:
    return q.register.project([q], Z_BASIS)


def measure_x(q: QubitId) -> int:
    """Diagonal-basis measurement; 0 means |+>."""
    return q.register.project([q], X_BASIS)


def qubit_state(q: QubitId, tol: float = 1e-9) -> StateVector:
    """Pure single-qubit state of ``q``, which must not be entangled with the rest."""
    reg = q.register
    axis = reg._live(q)
    mat = np.moveaxis(reg._psi, axis, -1).reshape(-1, 2)
    rho = mat.T @ mat.conj()
    purity = float(np.real(np.trace(rho @ rho)))
    if abs(purity - 1.0) > tol:
        raise QuantumError(f"{q} is entangled with other qubits (purity {purity:.6f})")
    row = mat[np.argmax(np.einsum("ij,ij->i", mat.conj(), mat).real)]
    return StateVector.from_amplitudes(row / np.linalg.norm(row))


StateLike = Union[StateVector, Sequence[complex], np.ndarray]


def _as_array(s: StateLike) -> np.ndarray:
    if isinstance(s, StateVector):
        return s.amplitudes
    return np.asarray(s, dtype=complex).ravel()


def fidelity_up_to_phase(a: StateLike, b: StateLike) -> float:
    """|<a|b>|^2, blind to the global phase of either argument."""
    va, vb = _as_array(a), _as_array(b)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    f = abs(np.vdot(va, vb)) ** 2
    return float(min(max(f, 0.0), 1.0))
