"""Circuit-level noise model and vectorised Pauli-frame noise samplers."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class NoiseModel:
    """Rates derived from one base rate ``p``.

    Two-qubit gates depolarise at ``p * two_qubit``, single-qubit gates at
    ``p * single_qubit``, measurements flip with ``p * measure``, resets
    prepare the wrong state with ``p * reset`` and every idle step
    depolarises at ``p * idle``.
    """

    p: float = 0.001
    two_qubit: float = 1.0
    single_qubit: float = 0.1
    measure: float = 1.0
    reset: float = 0.1
    idle: float = 0.02
    data: float = 1.0

    def __post_init__(self):
        for name in ("p2", "p1", "p_meas", "p_reset", "p_idle", "p_data"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @property
    def p2(self) -> float:
        return self.p * self.two_qubit

    @property
    def p1(self) -> float:
        return self.p * self.single_qubit

    @property
    def p_meas(self) -> float:
        return self.p * self.measure

    @property
    def p_reset(self) -> float:
        return self.p * self.reset

    @property
    def p_idle(self) -> float:
        return self.p * self.idle

    @property
    def p_data(self) -> float:
        return self.p * self.data

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls(p=0.0)

    def without_idle(self) -> "NoiseModel":
        return replace(self, idle=0.0)

    @property
    def is_noiseless(self) -> bool:
        return self.p == 0.0


# Pauli index convention: 0=I, 1=X, 2=Y, 3=Z; bit 0 of (x | z<<1)
PAULI_X = np.array([0, 1, 1, 0], dtype=bool)
PAULI_Z = np.array([0, 0, 1, 1], dtype=bool)


def depolarize1(x: np.ndarray, z: np.ndarray, p: float, rng: np.random.Generator) -> None:
    """Apply single-qubit depolarising noise in place to frame rows ``x``, ``z``."""
    if p <= 0:
        return
    hit = rng.random(x.shape) < p
    k = rng.integers(1, 4, size=x.shape)
    x ^= hit & PAULI_X[k]
    z ^= hit & PAULI_Z[k]


def depolarize2(xa, za, xb, zb, p: float, rng: np.random.Generator) -> None:
    """Two-qubit depolarising noise: one of the 15 non-identity Paulis with total probability ``p``."""
    if p <= 0:
        return
    hit = rng.random(xa.shape) < p
    k = rng.integers(1, 16, size=xa.shape)
    pa, pb = k & 3, k >> 2
    xa ^= hit & PAULI_X[pa]
    za ^= hit & PAULI_Z[pa]
    xb ^= hit & PAULI_X[pb]
    zb ^= hit & PAULI_Z[pb]


def flips(shape, p: float, rng: np.random.Generator) -> np.ndarray:
    if p <= 0:
        return np.zeros(shape, dtype=bool)
    return rng.random(shape) < p
