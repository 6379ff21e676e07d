"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import collections
import itertools

import numpy as np

from bilayer.circuit import CircuitIR, MeasRecord


# --- forward single-fault propagation ------------------------------------------------


def _forward(c: CircuitIR, start: int, inject) -> np.ndarray:
    """Measurement flips caused by a Pauli injected just before instruction ``start``.

    ``inject`` maps qubit -> (x, z). Measurement ``m`` flips iff the frame has
    an X component on the measured qubit.
    """
    x = np.zeros(c.n_qubits, dtype=bool)
    z = np.zeros(c.n_qubits, dtype=bool)
    for q, (a, b) in inject.items():
        x[q] ^= a
        z[q] ^= b
    flips = np.zeros(c.n_measurements, dtype=bool)
    m = sum(len(i.targets) for i in c.instructions[:start] if i.kind in ("measure", "flip-measure"))
    for ins in c.instructions[start:]:
        if ins.kind == "cnot":
            for a, b in ins.pairs:
                x[b] ^= x[a]
                z[a] ^= z[b]
        elif ins.kind == "cz":
            for a, b in ins.pairs:
                z[a] ^= x[b]
                z[b] ^= x[a]
        elif ins.kind == "h":
            for q in ins.targets:
                x[q], z[q] = z[q], x[q]
        elif ins.kind in ("measure", "flip-measure"):
            for q in ins.targets:
                flips[m] = x[q]
                m += 1
                z[q] = False  # Z frame randomised by the collapse; irrelevant to later Z readouts
        elif ins.kind == "reset":
            for q in ins.targets:
                x[q] = z[q] = False
    return flips


def _outputs(c: CircuitIR, flips: np.ndarray, sectors) -> tuple[frozenset, frozenset]:
    hist = collections.defaultdict(list)
    for i, rec in enumerate(c.measurements):
        if rec.kind in sectors:
            hist[(rec.kind, rec.index)].append((rec.round, i))
    pairs = []
    for (kind, gen), h in hist.items():
        h.sort()
        for (r0, m0), (r1, m1) in zip(h, h[1:]):
            pairs.append((r1, kind, gen, m0, m1))
    pairs.sort(key=lambda t: t[:3])
    dets = frozenset(i for i, (_, _, _, m0, m1) in enumerate(pairs) if flips[m0] ^ flips[m1])
    obs = frozenset(k for k, ms in enumerate(c.observables) if flips[list(ms)].sum() % 2)
    return dets, obs


def brute_force_model(c: CircuitIR, sectors=("X", "Z")) -> dict[tuple[frozenset, frozenset], float]:
    """Error classes by forward-simulating every elementary fault separately."""
    paulis1 = [(1, 0), (1, 1), (0, 1)]
    faults = []
    meas_seen = 0
    for idx, ins in enumerate(c.instructions):
        p = ins.p
        if ins.kind in ("depolarize1", "idle-depolarize"):
            for q in ins.targets:
                for pa in paulis1:
                    faults.append((p / 3, idx + 1, {q: pa}, None))
        elif ins.kind == "depolarize2":
            for a, b in ins.pairs:
                for pa, pb in itertools.product([(0, 0)] + paulis1, repeat=2):
                    if pa == (0, 0) and pb == (0, 0):
                        continue
                    inj = {q: pq for q, pq in ((a, pa), (b, pb)) if pq != (0, 0)}
                    faults.append((p / 15, idx + 1, inj, None))
        elif ins.kind == "x-error":
            faults += [(p, idx + 1, {q: (1, 0)}, None) for q in ins.targets]
        elif ins.kind == "z-error":
            faults += [(p, idx + 1, {q: (0, 1)}, None) for q in ins.targets]
        elif ins.kind == "y-error":
            faults += [(p, idx + 1, {q: (1, 1)}, None) for q in ins.targets]
        elif ins.kind == "reset" and p > 0:
            faults += [(p, idx + 1, {q: (1, 0)}, None) for q in ins.targets]
        elif ins.kind == "flip-measure":
            for k in range(len(ins.targets)):
                faults.append((p, None, None, meas_seen + k))
        if ins.kind in ("measure", "flip-measure"):
            meas_seen += len(ins.targets)
    merged: dict[tuple[frozenset, frozenset], float] = {}
    for p, start, inj, meas in faults:
        if meas is not None:
            flips = np.zeros(c.n_measurements, dtype=bool)
            flips[meas] = True
        else:
            flips = _forward(c, start, inj)
        key = _outputs(c, flips, sectors)
        if not key[0] and not key[1]:
            continue
        q = merged.get(key, 0.0)
        merged[key] = q * (1 - p) + p * (1 - q)
    return merged


def model_as_dict(model) -> dict[tuple[frozenset, frozenset], float]:
    return {
        (frozenset(model.class_detectors.row(e).tolist()), frozenset(model.class_observables.row(e).tolist())):
            float(model.probabilities[e])
        for e in range(model.n_classes)
    }


# --- small hand-built circuits ---------------------------------------------------------


def repetition_circuit(p: float, rounds: int = 1) -> CircuitIR:
    """Distance-3 bit-flip repetition memory: data 0..2, ancillas 3, 4."""
    c = CircuitIR(5)

    def extraction(r: int, noisy: bool):
        pr = p if noisy else 0.0
        c.add("reset", [3, 4], pr / 10)
        c.add("cnot", [0, 3, 1, 4])
        c.add("depolarize2", [0, 3, 1, 4], pr)
        c.add("cnot", [1, 3, 2, 4])
        c.add("depolarize2", [1, 3, 2, 4], pr)
        c.measure([3, 4], [MeasRecord("Z", 0, r), MeasRecord("Z", 1, r)], pr)

    c.begin_round(0)
    c.add("reset", [0, 1, 2])
    extraction(0, False)
    for r in range(1, rounds + 1):
        c.begin_round(r)
        c.add("depolarize1", [0, 1, 2], p)
        extraction(r, True)
    c.begin_round(rounds + 1)
    extraction(rounds + 1, False)
    c.measure([0, 1, 2], [MeasRecord("D", q, rounds + 1) for q in range(3)])
    idx = c.meas_index()
    c.observables.append((idx[("D", 0, rounds + 1)],))
    return c


# --- purification recurrence ------------------------------------------------------------


def bennett_recurrence(source, donor) -> tuple[float, np.ndarray]:
    """Noiseless bilateral-CNOT purification of Bell-diagonal pairs (I, X, Y, Z order).

    Bit-type errors (X, Y) on the source propagate to the donor target, so
    the donor Z readouts agree iff source and donor carry the same bit
    error. Phase errors of the donor kick back onto the source.
    """
    sI, sX, sY, sZ = source
    dI, dX, dY, dZ = donor
    ok = (sI + sZ) * (dI + dZ) + (sX + sY) * (dX + dY)
    out = np.array([
        sI * dI + sZ * dZ,
        sX * dX + sY * dY,
        sX * dY + sY * dX,
        sI * dZ + sZ * dI,
    ])
    return ok, out / ok


# --- exhaustive decoding ------------------------------------------------------------------


def low_weight_sets(model, max_weight: int = 2):
    """All class subsets of weight <= ``max_weight`` with syndrome, observables and probability."""
    n = model.n_classes
    eye = np.eye(n, dtype=np.uint8)
    S = np.array([model.syndrome_of(r) for r in eye])
    O = np.array([model.observables_of(r) for r in eye])
    odds = model.probabilities / (1 - model.probabilities)
    sets = [()]
    for w in range(1, max_weight + 1):
        sets += list(itertools.combinations(range(n), w))
    syn = np.zeros((len(sets), model.n_detectors), np.uint8)
    obs = np.zeros((len(sets), model.n_observables), np.uint8)
    prob = np.ones(len(sets))
    for k, s in enumerate(sets):
        for i in s:
            syn[k] ^= S[i]
            obs[k] ^= O[i]
            prob[k] *= odds[i]
    return syn, obs, prob / prob.sum()


def ml_failure_rate(syn, obs, prob) -> float:
    """Failure rate of the maximum-likelihood logical-class decoder on the given distribution."""
    table = collections.defaultdict(lambda: collections.defaultdict(float))
    for k in range(len(prob)):
        table[syn[k].tobytes()][obs[k].tobytes()] += prob[k]
    return float(sum(sum(d.values()) - max(d.values()) for d in table.values()))
