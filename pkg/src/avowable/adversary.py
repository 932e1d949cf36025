"""Intercept-resend eavesdropping on qubits crossing the quantum channel."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from avowable.quantum import X_BASIS, Z_BASIS, QubitId
from avowable.seeding import make_rng


class EveKind(enum.Enum):
    NONE = "none"
    INTERCEPT_RESEND_RANDOM = "intercept-resend"
    INTERCEPT_RESEND_FIXED = "intercept-resend-fixed"


class Basis(enum.Enum):
    Z = "Z"
    X = "X"


@dataclass(frozen=True)
class EveStrategy:
    kind: EveKind = EveKind.NONE
    coverage: float = 1.0
    fixed_basis: Basis | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError(f"coverage must lie in [0, 1], got {self.coverage}")
        fixed = self.kind is EveKind.INTERCEPT_RESEND_FIXED
        if fixed != (self.fixed_basis is not None):
            raise ValueError("fixed_basis is required for, and only for, the fixed-basis attack")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "EveStrategy":
        """CLI form: ``none``, ``intercept-resend[:coverage]`` or
        ``intercept-resend-fixed:<Z|X>[:coverage]``."""
        parts = text.strip().split(":")
        kind = EveKind(parts[0])
        if kind is EveKind.NONE:
            return cls(seed=seed)
        if kind is EveKind.INTERCEPT_RESEND_FIXED:
            basis = Basis(parts[1].upper())
            coverage = float(parts[2]) if len(parts) > 2 else 1.0
            return cls(kind, coverage, basis, seed)
        coverage = float(parts[1]) if len(parts) > 1 else 1.0
        return cls(kind, coverage, None, seed)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "coverage": self.coverage,
            "fixed_basis": self.fixed_basis.value if self.fixed_basis else None,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EveStrategy":
        fb = d.get("fixed_basis")
        return cls(
            EveKind(d.get("kind", "none")),
            float(d.get("coverage", 1.0)),
            Basis(fb) if fb else None,
            int(d.get("seed", 0)),
        )

    def start(self) -> "Eavesdropper":
        return Eavesdropper(self)


@dataclass(frozen=True)
class AttackLogEntry:
    attacked: bool
    basis: Basis | None = None
    outcome: int | None = None


@dataclass
class Eavesdropper:
    """A strategy in action: its private random stream and private log."""

    strategy: EveStrategy
    log: list[AttackLogEntry] = field(default_factory=list)

    def __post_init__(self):
        self.rng = make_rng(self.strategy.seed, "eve")

    def _choose(self) -> Basis | None:
        s = self.strategy
        if s.kind is EveKind.NONE:
            return None
        if self.rng.random() >= s.coverage:
            return None
        if s.kind is EveKind.INTERCEPT_RESEND_FIXED:
            return s.fixed_basis
        return Basis.Z if self.rng.integers(0, 2) == 0 else Basis.X


def attack_in_transit(eve: Eavesdropper, q: QubitId) -> AttackLogEntry:
    """Maybe measure ``q`` in Eve's basis and forward the collapsed qubit."""
    basis = eve._choose()
    if basis is None:
        entry = AttackLogEntry(False)
    else:
        matrix = Z_BASIS if basis is Basis.Z else X_BASIS
        outcome = q.register.project([q], matrix, rng=eve.rng, release=False)
        entry = AttackLogEntry(True, basis, outcome)
    eve.log.append(entry)
    return entry


def attack_batch(eve: Eavesdropper, states: np.ndarray) -> tuple[np.ndarray, list[AttackLogEntry]]:
    """Vectorised variant for independent single qubits given as (N, 2) amplitude rows."""
    from avowable.crypto import encode_bb84, measure_batch

    out = states.copy()
    entries = []
    chosen = [eve._choose() for _ in range(len(states))]
    hit = np.array([b is not None for b in chosen], dtype=bool)
    if hit.any():
        bases = np.array([0 if b is Basis.Z else 1 for b, h in zip(chosen, hit) if h])
        outcomes = measure_batch(states[hit], bases, eve.rng)
        out[hit] = encode_bb84(outcomes, bases)
        it = iter(outcomes.tolist())
        for b in chosen:
            entries.append(AttackLogEntry(True, b, next(it)) if b is not None else AttackLogEntry(False))
    else:
        entries = [AttackLogEntry(False) for _ in chosen]
    eve.log.extend(entries)
    return out, entries
