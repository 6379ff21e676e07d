"""Noisy Bell chains and one round of donor-based purification.

A long-range CNOT is teleported through a Bell pair shared between the two
ends of a routing path. The pair is built in depth 6 from nearest-neighbour
pairs joined by entanglement swapping, then purified once against a second
("donor") pair built alongside it; on disagreement the generator is masked
for that round rather than retried.

All simulation is Pauli-frame Monte Carlo over numpy arrays with one column
per shot. Residual errors are reported as the single-sided Pauli class of the
end-to-end pair (``X``/``Z`` components of both halves folded onto one).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .noise import NoiseModel, depolarize1, depolarize2, flips

CHAIN_DEPTH = 6
PURIFY_DEPTH = 2


@dataclass(frozen=True)
class BellDiagonalState:
    """Probabilities of ``I, X, Y, Z`` acting on one half of an ideal Bell pair."""

    p_i: float
    p_x: float
    p_y: float
    p_z: float

    def __post_init__(self):
        probs = self.as_array()
        if (probs < -1e-12).any() or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"not a probability vector: {probs}")

    @classmethod
    def perfect(cls) -> "BellDiagonalState":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_counts(cls, x: np.ndarray, z: np.ndarray) -> "BellDiagonalState":
        x = np.asarray(x, bool)
        z = np.asarray(z, bool)
        n = x.size
        if n == 0:
            raise ValueError("no samples")
        c = np.bincount(x.astype(np.int64) + 2 * z.astype(np.int64), minlength=4) / n
        # index x + 2z: 0=I, 1=X, 2=Z, 3=Y
        return cls(float(c[0]), float(c[1]), float(c[3]), float(c[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.p_i, self.p_x, self.p_y, self.p_z], dtype=float)

    @property
    def fidelity(self) -> float:
        return self.p_i

    def sample(self, shots: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``shots`` error frames ``(x, z)``."""
        probs = np.clip(self.as_array(), 0, None)
        k = rng.choice(4, size=shots, p=probs / probs.sum())
        return np.isin(k, (1, 2)), np.isin(k, (2, 3))


def _chain_frames(length: int, noise: NoiseModel, shots: int, rng: np.random.Generator):
    """Frames of the end-to-end pair after a depth-6 swapping chain of ``length`` hops.

    Qubits ``0..length`` lie along the path. Even qubits are paired with their
    right neighbour; junctions ``(a, a+1)`` with ``a`` odd are Bell-measured
    (``a`` in X, ``a+1`` in Z). If ``length`` is even the last qubit has no
    partner and is attached by the junction CNOT alone, with only ``a``
    measured. Outcome flips feed forward into Pauli corrections on the far end.
    """
    if length < 1:
        raise ValueError("chain length must be >= 1")
    nq = length + 1
    x = np.zeros((nq, shots), dtype=bool)
    z = np.zeros((nq, shots), dtype=bool)
    end = length

    def idle(busy):
        if noise.p_idle > 0:
            for q in range(nq):
                if q not in busy:
                    depolarize1(x[q], z[q], noise.p_idle, rng)

    # 1. reset all to |0>: a faulty reset leaves |1>
    x ^= flips(x.shape, noise.p_reset, rng)
    # 2. H on the first qubit of each pair
    heads = list(range(0, nq - 1, 2))
    for q in heads:
        x[q], z[q] = z[q].copy(), x[q].copy()
        depolarize1(x[q], z[q], noise.p1, rng)
    idle(set(heads))
    # 3. pair creation
    pairs = [(q, q + 1) for q in heads]
    for a, b in pairs:
        x[b] ^= x[a]
        z[a] ^= z[b]
        depolarize2(x[a], z[a], x[b], z[b], noise.p2, rng)
    idle({q for pr in pairs for q in pr})
    # 4. junction CNOTs
    junctions = [(a, a + 1) for a in range(1, nq - 1, 2)]
    for a, b in junctions:
        x[b] ^= x[a]
        z[a] ^= z[b]
        depolarize2(x[a], z[a], x[b], z[b], noise.p2, rng)
    idle({q for j in junctions for q in j})
    # 5. H on junction controls (X-basis readout)
    for a, _ in junctions:
        x[a], z[a] = z[a].copy(), x[a].copy()
        depolarize1(x[a], z[a], noise.p1, rng)
    idle({a for a, _ in junctions})
    # 6. measure and feed forward to the far end
    measured = set()
    for a, b in junctions:
        fa = x[a] ^ flips(shots, noise.p_meas, rng)
        z[end] ^= fa
        measured.add(a)
        if b != end:
            fb = x[b] ^ flips(shots, noise.p_meas, rng)
            x[end] ^= fb
            measured.add(b)
    idle(measured)
    # fold both halves of the pair onto the far end
    return x[0] ^ x[end], z[0] ^ z[end]


def simulate_bell_chain(length: int, noise: NoiseModel, shots: int, seed: int = 0) -> BellDiagonalState:
    """Residual Pauli distribution of a ``length``-hop Bell chain."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = np.random.default_rng(seed)
    return BellDiagonalState.from_counts(*_chain_frames(length, noise, shots, rng))


def _purify_frames(xs, zs, xd, zd, noise: NoiseModel, rng: np.random.Generator):
    """Bilateral CNOT source->donor, Z readout of both donor halves, keep on agreement.

    Frames are single-sided, so the two donor outcomes' parity is the donor
    X frame after the CNOT. Gate noise acts on both bilateral CNOTs (modelled
    on the folded frame of each half) and each readout can flip.
    """
    shots = xs.shape[0]
    xs, zs, xd, zd = xs.copy(), zs.copy(), xd.copy(), zd.copy()
    # the CNOTs on side A and side B, each with its own two-qubit noise
    xd ^= xs
    zs ^= zd
    for _ in range(2):
        depolarize2(xs, zs, xd, zd, noise.p2, rng)
    parity = xd ^ flips(shots, noise.p_meas, rng) ^ flips(shots, noise.p_meas, rng)
    for _ in range(2):
        # source halves wait while the donor is read out
        depolarize1(xs, zs, noise.p_idle, rng)
    accept = ~parity
    return accept, xs, zs


def bennett_purify(source: BellDiagonalState, donor: BellDiagonalState, noise: NoiseModel,
                   shots: int = 100_000, seed: int = 0) -> tuple[float, BellDiagonalState]:
    """Monte Carlo single-round purification.

    Returns:
        ``(success_prob, post_selected_state)``. If no shot is accepted the
        state is reported as fully mixed.
    """
    rng = np.random.default_rng(seed)
    xs, zs = source.sample(shots, rng)
    xd, zd = donor.sample(shots, rng)
    accept, x, z = _purify_frames(xs, zs, xd, zd, noise, rng)
    success = float(accept.mean())
    if not accept.any():
        return success, BellDiagonalState(0.25, 0.25, 0.25, 0.25)
    return success, BellDiagonalState.from_counts(x[accept], z[accept])


def effective_cnot_error(state: BellDiagonalState) -> float:
    """Two-qubit depolarising rate ``16/15 * (1 - F)``; a maximally mixed pair maps to 1."""
    return min(1.0, 16.0 / 15.0 * (1.0 - state.p_i))


@dataclass(frozen=True)
class PurifyEntry:
    length: int
    success_prob: float
    state: BellDiagonalState
    cnot_error: float

    @property
    def fidelity(self) -> float:
        return self.state.p_i


@dataclass(frozen=True)
class PurifyTable:
    """Per-length purification success and effective CNOT error."""

    entries: dict[int, PurifyEntry]
    metadata: dict[str, str] = field(default_factory=dict)

    def __getitem__(self, length: int) -> PurifyEntry:
        try:
            return self.entries[int(length)]
        except KeyError:
            raise KeyError(f"purification table has no entry for chain length {length}") from None

    def __contains__(self, length: int) -> bool:
        return int(length) in self.entries

    @property
    def lengths(self) -> list[int]:
        return sorted(self.entries)

    @property
    def is_noiseless(self) -> bool:
        return all(e.success_prob == 1.0 and e.cnot_error == 0.0 for e in self.entries.values())

    @classmethod
    def noiseless(cls, max_length: int) -> "PurifyTable":
        perfect = BellDiagonalState.perfect()
        return cls({L: PurifyEntry(L, 1.0, perfect, 0.0) for L in range(1, max_length + 1)},
                   {"noise": "none"})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["length", "success_prob", "fidelity", "cnot_error"])
        for L in self.lengths:
            e = self.entries[L]
            w.writerow([L, f"{e.success_prob:.8g}", f"{e.fidelity:.8g}", f"{e.cnot_error:.8g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PurifyTable":
        entries = {}
        for row in csv.DictReader(io.StringIO(text)):
            L = int(row["length"])
            f = float(row["fidelity"])
            rest = (1.0 - f) / 3.0
            entries[L] = PurifyEntry(L, float(row["success_prob"]), BellDiagonalState(f, rest, rest, rest),
                                     float(row["cnot_error"]))
        return cls(entries, {"source": "csv"})


def build_purify_table(max_length: int, noise: NoiseModel, shots: int = 100_000, seed: int = 0,
                       lengths=None) -> PurifyTable:
    """Simulate source and donor chains for each length, then purify them.

    Length ``L`` uses seed ``seed + L`` so tables of different extent agree
    on their common lengths.
    """
    if max_length < 1:
        raise ValueError("max_length must be >= 1")
    entries = {}
    for L in lengths if lengths is not None else range(1, max_length + 1):
        if noise.is_noiseless:
            entries[L] = PurifyEntry(L, 1.0, BellDiagonalState.perfect(), 0.0)
            continue
        rng = np.random.default_rng(seed + L)
        xs, zs = _chain_frames(L, noise, shots, rng)
        xd, zd = _chain_frames(L, noise, shots, rng)
        accept, x, z = _purify_frames(xs, zs, xd, zd, noise, rng)
        if accept.any():
            state = BellDiagonalState.from_counts(x[accept], z[accept])
        else:
            state = BellDiagonalState(0.25, 0.25, 0.25, 0.25)
        entries[L] = PurifyEntry(L, float(accept.mean()), state, effective_cnot_error(state))
    meta = {"p": repr(noise.p), "shots": str(shots), "seed": str(seed),
            "idle_in_chain": "yes" if noise.p_idle > 0 else "no"}
    return PurifyTable(entries, meta)
