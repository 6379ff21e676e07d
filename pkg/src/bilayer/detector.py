"""Detector error models and Pauli-frame sampling for :class:`CircuitIR`.

Detectors compare consecutive available measurements of the same check, so a
check skipped for a few rounds gets one detector spanning the whole gap.

The error model is built by propagating output sensitivities backwards
through the circuit. For every qubit we keep two bitsets (Python integers):
the outputs flipped by an X error at the current point and those flipped by
a Z error. Each noise site then reads off its signature directly.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import CircuitIR
from .gf2 import SparseIndexMatrix


class NondeterministicError(ValueError):
    """A detector or observable is random even without noise."""


@dataclass(frozen=True)
class Detector:
    id: int
    kind: str
    generator: int
    round: int
    prev_round: int
    measurements: tuple[int, int]

    @property
    def span(self) -> int:
        return self.round - self.prev_round


def circuit_detectors(c: CircuitIR, sectors: Sequence[str] = ("X", "Z")) -> list[Detector]:
    """One detector per pair of consecutive measurements of a check."""
    history: dict[tuple[str, int], list[tuple[int, int]]] = defaultdict(list)
    for m, rec in enumerate(c.measurements):
        if rec.kind in sectors:
            history[(rec.kind, rec.index)].append((rec.round, m))
    pairs = []
    for (kind, gen), hist in history.items():
        hist.sort()
        for (r0, m0), (r1, m1) in zip(hist, hist[1:]):
            pairs.append((r1, kind, gen, r0, m0, m1))
    pairs.sort(key=lambda t: (t[0], t[1], t[2]))
    return [Detector(i, kind, gen, r1, r0, (m0, m1)) for i, (r1, kind, gen, r0, m0, m1) in enumerate(pairs)]


@dataclass(frozen=True, eq=False)
class DetectorModel:
    """Merged error classes with their detector and observable signatures.

    ``check_matrix`` is detectors x classes and ``observable_matrix`` is
    observables x classes, the two halves of the decoding graph.
    """

    detectors: tuple[Detector, ...]
    n_observables: int
    probabilities: np.ndarray
    class_detectors: SparseIndexMatrix = field(repr=False)
    class_observables: SparseIndexMatrix = field(repr=False)
    sectors: tuple[str, ...] = ("X", "Z")

    @property
    def n_detectors(self) -> int:
        return len(self.detectors)

    @property
    def n_classes(self) -> int:
        return len(self.probabilities)

    @property
    def check_matrix(self) -> SparseIndexMatrix:
        return self.class_detectors.transpose()

    @property
    def observable_matrix(self) -> np.ndarray:
        return self.class_observables.transpose().to_dense()

    def syndrome_of(self, classes) -> np.ndarray:
        s = np.zeros(self.n_detectors, dtype=np.uint8)
        for e in np.flatnonzero(np.asarray(classes)):
            s[self.class_detectors.row(e)] ^= 1
        return s

    def observables_of(self, classes) -> np.ndarray:
        o = np.zeros(self.n_observables, dtype=np.uint8)
        for e in np.flatnonzero(np.asarray(classes)):
            o[self.class_observables.row(e)] ^= 1
        return o

    def export(self) -> str:
        lines = []
        for e in range(self.n_classes):
            dets = " ".join(f"D{d}" for d in self.class_detectors.row(e))
            obs = " ".join(f"L{o}" for o in self.class_observables.row(e))
            lines.append(f"error {self.probabilities[e]!r} {dets} | {obs}".rstrip())
        return "\n".join(lines) + ("\n" if lines else "")


def xor_probability(p: float, q: float) -> float:
    """Probability that exactly one of two independent events fires."""
    return p * (1 - q) + q * (1 - p)


def _bits(x: int) -> list[int]:
    out = []
    while x:
        low = x & -x
        out.append(low.bit_length() - 1)
        x ^= low
    return out


def fault_signatures(c: CircuitIR, sectors: Sequence[str] = ("X", "Z")):
    """Yield ``(probability, signature)`` for every elementary fault outcome.

    Signatures are integers with detector ``i`` at bit ``i`` and observable
    ``k`` at bit ``n_detectors + k``. Trivial signatures are included.

    Raises:
        NondeterministicError: if an output depends on a random outcome.
    """
    dets = circuit_detectors(c, sectors)
    n_det = len(dets)
    out_of = defaultdict(int)
    for d in dets:
        for m in d.measurements:
            out_of[m] ^= 1 << d.id
    for k, obs in enumerate(c.observables):
        for m in obs:
            out_of[m] ^= 1 << (n_det + k)

    nq = c.n_qubits
    fx = [0] * nq
    fz = [0] * nq
    m_ptr = c.n_measurements
    sites = []
    for ins in reversed(c.instructions):
        kind, tg, p = ins.kind, ins.targets, ins.p
        if kind == "cnot":
            for a, b in ins.pairs:
                fx[a] ^= fx[b]
                fz[b] ^= fz[a]
        elif kind == "cz":
            for a, b in ins.pairs:
                fx[a], fx[b] = fx[a] ^ fz[b], fx[b] ^ fz[a]
        elif kind == "h":
            for q in tg:
                fx[q], fz[q] = fz[q], fx[q]
        elif kind in ("measure", "flip-measure"):
            m_ptr -= len(tg)
            for i, q in enumerate(tg):
                o = out_of.get(m_ptr + i, 0)
                if fz[q]:
                    raise NondeterministicError(f"outputs {_bits(fz[q])} depend on a random outcome at measurement {m_ptr + i}")
                if p > 0:
                    sites.append((p, o))
                fx[q] ^= o
        elif kind == "reset":
            for q in tg:
                if p > 0:
                    sites.append((p, fx[q]))
                if fz[q]:
                    raise NondeterministicError(f"outputs {_bits(fz[q])} are not fixed by the reset of qubit {q}")
                fx[q] = 0
                fz[q] = 0
        elif kind in ("depolarize1", "idle-depolarize"):
            third = p / 3
            for q in tg:
                sites.append((third, fx[q]))
                sites.append((third, fx[q] ^ fz[q]))
                sites.append((third, fz[q]))
        elif kind == "x-error":
            sites.extend((p, fx[q]) for q in tg)
        elif kind == "z-error":
            sites.extend((p, fz[q]) for q in tg)
        elif kind == "y-error":
            sites.extend((p, fx[q] ^ fz[q]) for q in tg)
        elif kind == "depolarize2":
            share = p / 15
            for a, b in ins.pairs:
                sa = (0, fx[a], fx[a] ^ fz[a], fz[a])
                sb = (0, fx[b], fx[b] ^ fz[b], fz[b])
                for k in range(1, 16):
                    sites.append((share, sa[k & 3] ^ sb[k >> 2]))
        elif kind == "tick":
            pass
        else:  # pragma: no cover - Instruction validates kinds
            raise ValueError(kind)
    for q in range(nq):
        if fz[q]:
            raise NondeterministicError(f"outputs {_bits(fz[q])} depend on the initial state of qubit {q}")
    return dets, sites


def build_detector_model(c: CircuitIR, sectors: Sequence[str] = ("X", "Z")) -> DetectorModel:
    """Merge all fault outcomes into error classes.

    Args:
        sectors: Which check types get detectors. Restricting a Z-basis
            memory to ``("Z",)`` keeps exactly the detectors that see X
            errors, which are the ones that can flip logical Z.
    """
    if not c.observables:
        raise ValueError("circuit has no observables")
    dets, sites = fault_signatures(c, tuple(sectors))
    merged: dict[int, float] = {}
    for p, sig in sites:
        if sig and p > 0:
            q = merged.get(sig)
            merged[sig] = p if q is None else xor_probability(q, p)
    n_det = len(dets)
    mask = (1 << n_det) - 1
    keys = sorted(merged)
    det_rows = [_bits(k & mask) for k in keys]
    obs_rows = [_bits(k >> n_det) for k in keys]
    probs = np.array([merged[k] for k in keys], dtype=float)
    return DetectorModel(
        tuple(dets), len(c.observables), probs,
        SparseIndexMatrix.from_rows(n_det, det_rows),
        SparseIndexMatrix.from_rows(len(c.observables), obs_rows),
        tuple(sectors),
    )


# --- Pauli-frame sampler -------------------------------------------------------------


def _sparse_hits(n_trials: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Indices in ``range(n_trials)`` hit independently with probability ``p``."""
    if p <= 0 or n_trials == 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 0.2:
        return np.flatnonzero(rng.random(n_trials) < p)
    # geometric skips between hits
    out = []
    pos = -1
    batch = int(n_trials * p * 1.2) + 16
    while True:
        gaps = rng.geometric(p, size=batch)
        idx = pos + np.cumsum(gaps)
        out.append(idx[idx < n_trials])
        if idx[-1] >= n_trials:
            break
        pos = int(idx[-1])
    return np.concatenate(out)


class FrameSimulator:
    """Bit-packed Pauli frames: row ``q`` of ``x``/``z`` holds one bit per shot."""

    def __init__(self, n_qubits: int, n_meas: int, shots: int, rng: np.random.Generator):
        self.shots = shots
        self.words = (shots + 63) // 64
        self.x = np.zeros((n_qubits, self.words), dtype=np.uint64)
        self.z = np.zeros((n_qubits, self.words), dtype=np.uint64)
        self.rec = np.zeros((n_meas, self.words), dtype=np.uint64)
        self.rng = rng
        self.m_ptr = 0

    def _random_words(self, rows: int) -> np.ndarray:
        return self.rng.integers(0, 2**64, size=(rows, self.words), dtype=np.uint64, endpoint=False)

    def _flip(self, arr: np.ndarray, rows: np.ndarray, hits: np.ndarray) -> None:
        """XOR a 1 into ``arr[rows[i // shots], i % shots]`` for every hit ``i``."""
        if hits.size == 0:
            return
        r, s = np.divmod(hits, self.shots)
        np.bitwise_xor.at(arr, (rows[r], s >> 6), np.left_shift(np.uint64(1), (s & 63).astype(np.uint64)))

    def _pauli_noise(self, qubits: np.ndarray, p: float, n_paulis: int):
        hits = _sparse_hits(len(qubits) * self.shots, p, self.rng)
        return hits, self.rng.integers(1, n_paulis + 1, size=hits.size)

    def run(self, c: CircuitIR) -> None:
        x, z = self.x, self.z
        for ins in c.instructions:
            kind, p = ins.kind, ins.p
            tg = np.asarray(ins.targets, dtype=np.int64)
            if kind == "cnot":
                a, b = tg[0::2], tg[1::2]
                x[b] ^= x[a]
                z[a] ^= z[b]
            elif kind == "cz":
                a, b = tg[0::2], tg[1::2]
                za = z[a] ^ x[b]
                z[b] ^= x[a]
                z[a] = za
            elif kind == "h":
                x[tg], z[tg] = z[tg], x[tg].copy()
            elif kind == "reset":
                x[tg] = 0
                z[tg] = self._random_words(len(tg))
                if p > 0:
                    self._flip(x, tg, _sparse_hits(len(tg) * self.shots, p, self.rng))
            elif kind in ("measure", "flip-measure"):
                k = len(tg)
                block = x[tg].copy()
                if p > 0:
                    self._flip(block, np.arange(k), _sparse_hits(k * self.shots, p, self.rng))
                self.rec[self.m_ptr : self.m_ptr + k] = block
                self.m_ptr += k
                z[tg] = self._random_words(k)
            elif kind in ("depolarize1", "idle-depolarize"):
                hits, pauli = self._pauli_noise(tg, p, 3)
                self._flip(x, tg, hits[pauli != 3])
                self._flip(z, tg, hits[pauli != 1])
            elif kind in ("x-error", "y-error", "z-error"):
                hits = _sparse_hits(len(tg) * self.shots, p, self.rng)
                if kind != "z-error":
                    self._flip(x, tg, hits)
                if kind != "x-error":
                    self._flip(z, tg, hits)
            elif kind == "depolarize2":
                a, b = tg[0::2], tg[1::2]
                hits, pauli = self._pauli_noise(a, p, 15)
                pa, pb = pauli & 3, pauli >> 2
                self._flip(x, a, hits[(pa == 1) | (pa == 2)])
                self._flip(z, a, hits[(pa == 2) | (pa == 3)])
                self._flip(x, b, hits[(pb == 1) | (pb == 2)])
                self._flip(z, b, hits[(pb == 2) | (pb == 3)])
            elif kind == "tick":
                pass
        if self.m_ptr != c.n_measurements:
            raise RuntimeError("measurement count mismatch")


def _unpack(words: np.ndarray, shots: int) -> np.ndarray:
    """(rows, words) uint64 -> (shots, rows) uint8."""
    if words.shape[0] == 0:
        return np.zeros((shots, 0), dtype=np.uint8)
    bits = np.unpackbits(np.ascontiguousarray(words).view(np.uint8), axis=1, bitorder="little")
    return bits[:, :shots].T.copy()


def sample_shots(c: CircuitIR, model: DetectorModel | None, shots: int, seed: int = 0,
                 sectors: Sequence[str] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Sample detector and observable outcomes.

    Returns:
        ``(detectors, observables)`` as ``uint8`` arrays of shape
        ``(shots, n_detectors)`` and ``(shots, n_observables)``. Detector
        order follows ``model.detectors`` (or all sectors without a model).
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    sim = FrameSimulator(c.n_qubits, c.n_measurements, shots, np.random.default_rng(seed))
    sim.run(c)
    if model is not None:
        dets = model.detectors
    else:
        dets = circuit_detectors(c, tuple(sectors) if sectors else ("X", "Z"))
    if dets:
        a = np.array([d.measurements[0] for d in dets])
        b = np.array([d.measurements[1] for d in dets])
        det_words = sim.rec[a] ^ sim.rec[b]
    else:
        det_words = np.zeros((0, sim.words), dtype=np.uint64)
    obs_words = np.zeros((len(c.observables), sim.words), dtype=np.uint64)
    for k, obs in enumerate(c.observables):
        if obs:
            obs_words[k] = np.bitwise_xor.reduce(sim.rec[list(obs)], axis=0)
    return _unpack(det_words, shots), _unpack(obs_words, shots)


def pack_shots(dets: np.ndarray, obs: np.ndarray) -> bytes:
    """Shot rows as packed bits, detectors then observables, each row byte-aligned."""
    rows = np.hstack([dets, obs]).astype(np.uint8)
    return np.packbits(rows, axis=1, bitorder="little").tobytes()


def unpack_shots(data: bytes, n_detectors: int, n_observables: int) -> tuple[np.ndarray, np.ndarray]:
    width = n_detectors + n_observables
    nbytes = (width + 7) // 8
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, nbytes)
    bits = np.unpackbits(raw, axis=1, bitorder="little")[:, :width]
    return bits[:, :n_detectors].copy(), bits[:, n_detectors:].copy()
