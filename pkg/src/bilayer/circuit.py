"""Memory-experiment circuits in a small line-oriented IR.

Qubits are integers. BB circuits use data qubits ``0..n-1``, X-check
ancillas ``n..n+c-1`` and Z-check ancillas ``n+c..n+2c-1`` with ``c = ell*m``.
Every instruction acts on pairwise-disjoint qubits so a sampler can apply it
in one vectorised operation.

A run is: noiseless data reset and full extraction (round 0), ``t`` noisy
rounds, one more noiseless full extraction (round ``t+1``) and a noiseless
transversal data readout that defines the logical observables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .bbcode import BBCode, css_logicals
from .gf2 import BitMatrix
from .layout import GeneratorClassification, Placement
from .noise import NoiseModel
from .purify import PurifyTable
from .router import PHYSICAL_DEPTH_PER_STEP, RoutingPlan

GATE_KINDS = {"reset", "h", "cnot", "cz", "measure", "flip-measure", "tick"}
NOISE_KINDS = {"depolarize1", "depolarize2", "idle-depolarize", "x-error", "y-error", "z-error"}
KINDS = GATE_KINDS | NOISE_KINDS
TWO_QUBIT = {"cnot", "cz", "depolarize2"}


@dataclass(frozen=True)
class Instruction:
    kind: str
    targets: tuple[int, ...]
    p: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown instruction kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"probability {self.p} outside [0, 1]")
        if self.kind in TWO_QUBIT and len(self.targets) % 2:
            raise ValueError(f"{self.kind} needs an even number of targets")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"{self.kind} targets overlap: {self.targets}")
        if any(t < 0 for t in self.targets):
            raise ValueError("negative qubit index")

    @property
    def pairs(self) -> list[tuple[int, int]]:
        t = self.targets
        return list(zip(t[::2], t[1::2]))

    @property
    def is_noise(self) -> bool:
        return self.kind in NOISE_KINDS or (self.kind in ("reset", "flip-measure") and self.p > 0)

    def format(self) -> str:
        s = f"OP {self.kind} " + " ".join(map(str, self.targets))
        if self.p or self.kind in NOISE_KINDS or self.kind == "flip-measure":
            s += f" p={self.p!r}"
        return s


@dataclass(frozen=True)
class MeasRecord:
    """What a measurement slot reads: ``kind`` is ``X``/``Z`` (check) or ``D`` (data qubit)."""

    kind: str
    index: int
    round: int


@dataclass
class MaskSchedule:
    """Per-round availability of every check.

    ``planned[kind][r]`` is the planned mask for round ``r`` (long checks only
    on multiples of ``period``); ``available[kind][r]`` additionally drops
    checks whose purifications failed.
    """

    period: int
    rounds: int
    long: dict[str, np.ndarray]
    planned: dict[str, np.ndarray] = field(repr=False)
    available: dict[str, np.ndarray] = field(repr=False)

    def is_available(self, kind: str, gen: int, rnd: int) -> bool:
        return bool(self.available[kind][rnd, gen])


def mask_availability(schedule: MaskSchedule, generator: tuple[str, int], rnd: int) -> bool:
    kind, gen = generator
    if not 0 <= rnd < schedule.available[kind].shape[0]:
        raise ValueError(f"round {rnd} outside the experiment")
    return schedule.is_available(kind, gen, rnd)


def sample_mask_schedule(long: dict[str, np.ndarray], success: dict[str, np.ndarray], period: int,
                         rounds: int, rng: np.random.Generator) -> MaskSchedule:
    """Plan the masking and sample purification failures.

    Rounds ``0`` and ``rounds + 1`` are the noiseless extractions and always
    measure everything.
    """
    if period < 1:
        raise ValueError("t_m must be >= 1")
    planned, available = {}, {}
    for kind in ("X", "Z"):
        n = len(long[kind])
        pl = np.ones((rounds + 2, n), dtype=bool)
        for r in range(1, rounds + 1):
            if r % period:
                pl[r] = ~long[kind]
        av = pl.copy()
        draws = rng.random((rounds, n))
        av[1 : rounds + 1] &= draws < success[kind][None, :]
        planned[kind], available[kind] = pl, av
    return MaskSchedule(period, rounds, long, planned, available)


@dataclass
class CircuitIR:
    n_qubits: int
    instructions: list[Instruction] = field(default_factory=list)
    round_starts: list[int] = field(default_factory=list)
    measurements: list[MeasRecord] = field(default_factory=list)
    observables: list[tuple[int, ...]] = field(default_factory=list)
    depth: dict[int, int] = field(default_factory=dict)
    meta: dict[str, str] = field(default_factory=dict)
    schedule: MaskSchedule | None = field(default=None, repr=False)

    # builders ------------------------------------------------------------
    def begin_round(self, k: int) -> None:
        if len(self.round_starts) != k:
            raise ValueError(f"round {k} out of order")
        self.round_starts.append(len(self.instructions))

    def add(self, kind: str, targets: Iterable[int], p: float = 0.0) -> None:
        targets = tuple(int(t) for t in targets)
        if not targets and kind != "tick":
            return
        if kind in NOISE_KINDS and p == 0.0:
            return
        if kind == "flip-measure" and p == 0.0:
            kind = "measure"
        if any(t >= self.n_qubits for t in targets):
            raise ValueError("target outside the register")
        self.instructions.append(Instruction(kind, targets, p))

    def measure(self, qubits: Sequence[int], records: Sequence[MeasRecord], p: float = 0.0) -> None:
        if len(qubits) != len(records):
            raise ValueError("one record per measured qubit")
        if not len(qubits):
            return
        self.add("flip-measure" if p > 0 else "measure", qubits, p)
        self.measurements.extend(records)

    # queries -------------------------------------------------------------
    @property
    def n_rounds(self) -> int:
        return len(self.round_starts)

    @property
    def n_measurements(self) -> int:
        return len(self.measurements)

    def round_instructions(self, k: int) -> list[Instruction]:
        end = self.round_starts[k + 1] if k + 1 < len(self.round_starts) else len(self.instructions)
        return self.instructions[self.round_starts[k] : end]

    def meas_index(self) -> dict[tuple[str, int, int], int]:
        return {(m.kind, m.index, m.round): i for i, m in enumerate(self.measurements)}

    @property
    def total_depth(self) -> int:
        return sum(self.depth.values())

    def count(self, kind: str) -> int:
        """Number of gate applications (pairs for two-qubit kinds)."""
        per = 2 if kind in TWO_QUBIT else 1
        return sum(len(i.targets) // per for i in self.instructions if i.kind == kind)

    def without_noise(self) -> "CircuitIR":
        out = CircuitIR(self.n_qubits, [], list(self.round_starts), list(self.measurements),
                        list(self.observables), dict(self.depth), dict(self.meta), self.schedule)
        remap = {}
        for idx, ins in enumerate(self.instructions):
            remap[idx] = len(out.instructions)
            if ins.kind in NOISE_KINDS:
                continue
            kind = "measure" if ins.kind == "flip-measure" else ins.kind
            out.instructions.append(Instruction(kind, ins.targets, 0.0))
        remap[len(self.instructions)] = len(out.instructions)
        out.round_starts = [remap[s] for s in self.round_starts]
        return out

    # serialisation -------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"QUBITS {self.n_qubits}"]
        lines += [f"META {k} {v}" for k, v in sorted(self.meta.items())]
        starts = {s: k for k, s in enumerate(self.round_starts)}
        for idx, ins in enumerate(self.instructions):
            if idx in starts:
                lines.append(f"ROUND {starts[idx]}")
            lines.append(ins.format())
        for k in range(len(self.round_starts)):
            if self.round_starts[k] == len(self.instructions):
                lines.append(f"ROUND {k}")
        lines += [f"MEAS {i} {m.kind} {m.index} {m.round}" for i, m in enumerate(self.measurements)]
        lines += [f"OBS {i} " + " ".join(map(str, obs)) for i, obs in enumerate(self.observables)]
        lines += [f"DEPTH {k} {v}" for k, v in sorted(self.depth.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CircuitIR":
        c = None
        for raw in text.splitlines():
            tok = raw.split()
            if not tok:
                continue
            head = tok[0]
            if head == "QUBITS":
                c = cls(int(tok[1]))
                continue
            if c is None:
                raise ValueError("circuit text must start with QUBITS")
            if head == "META":
                c.meta[tok[1]] = " ".join(tok[2:])
            elif head == "ROUND":
                c.round_starts.append(len(c.instructions))
            elif head == "OP":
                p = 0.0
                args = tok[2:]
                if args and args[-1].startswith("p="):
                    p = float(args[-1][2:])
                    args = args[:-1]
                c.instructions.append(Instruction(tok[1], tuple(int(a) for a in args), p))
            elif head == "MEAS":
                c.measurements.append(MeasRecord(tok[2], int(tok[3]), int(tok[4])))
            elif head == "OBS":
                c.observables.append(tuple(int(a) for a in tok[2:]))
            elif head == "DEPTH":
                c.depth[int(tok[1])] = int(tok[2])
            else:
                raise ValueError(f"unknown record {head!r}")
        if c is None:
            raise ValueError("empty circuit text")
        return c


# --- BB memory -------------------------------------------------------------------


@dataclass(frozen=True)
class CouplingInfo:
    """Per-check coupling distances and routed flags, in support order."""

    distance: dict[str, np.ndarray]
    routed: dict[str, np.ndarray]


def coupling_info(placement: Placement) -> CouplingInfo:
    dist, routed = {}, {}
    for kind in ("X", "Z"):
        chk = placement.check_pos(kind)
        q = placement.qubit_pos[placement.check_support(kind)]
        d = np.abs(q - chk[:, None, :]).sum(axis=2)
        dist[kind] = d
        routed[kind] = d > 1
    return CouplingInfo(dist, routed)


def _check_success(info: CouplingInfo, table: PurifyTable) -> dict[str, np.ndarray]:
    out = {}
    for kind in ("X", "Z"):
        s = np.ones(info.distance[kind].shape[0])
        for c, row in enumerate(info.distance[kind]):
            for k, d in enumerate(row):
                if info.routed[kind][c, k]:
                    s[c] *= table[int(d)].success_prob
        out[kind] = s
    return out


def _emit_extraction(c: CircuitIR, code_n: int, n_checks: int, supports: dict[str, np.ndarray],
                     active: dict[str, np.ndarray], rnd: int, noise: NoiseModel | None,
                     coupling_p: dict[str, np.ndarray] | None, order: Sequence[int]) -> None:
    """Z checks then X checks, each with its own reset/couplings/readout.

    ``coupling_p[kind][check, k]`` is the depolarising rate after coupling
    ``k`` of ``check``; ``None`` means noiseless.
    """
    x_anc = code_n
    z_anc = code_n + n_checks
    p_reset = noise.p_reset if noise else 0.0
    p1 = noise.p1 if noise else 0.0
    p_meas = noise.p_meas if noise else 0.0
    for kind, base in (("Z", z_anc), ("X", x_anc)):
        gens = np.flatnonzero(active[kind])
        if not gens.size:
            continue
        anc = base + gens
        c.add("reset", anc, p_reset)
        if kind == "X":
            c.add("h", anc)
            c.add("depolarize1", anc, p1)
        for k in order:
            data = supports[kind][gens, k]
            if kind == "Z":
                pairs = np.column_stack([data, anc]).ravel()
            else:
                pairs = np.column_stack([anc, data]).ravel()
            c.add("cnot", pairs)
            if coupling_p is not None:
                probs = coupling_p[kind][gens, k]
                for pv in np.unique(probs):
                    sel = probs == pv
                    c.add("depolarize2", np.column_stack([data[sel], anc[sel]]).ravel()
                          if kind == "Z" else np.column_stack([anc[sel], data[sel]]).ravel(), float(pv))
        if kind == "X":
            c.add("h", anc)
            c.add("depolarize1", anc, p1)
        c.measure(anc, [MeasRecord(kind, int(g), rnd) for g in gens], p_meas)


def _data_prep(c: CircuitIR, data: np.ndarray, basis: str) -> None:
    c.add("reset", data)
    if basis == "X":
        c.add("h", data)


def _data_readout(c: CircuitIR, data: np.ndarray, basis: str, rnd: int) -> None:
    if basis == "X":
        c.add("h", data)
    c.measure(data, [MeasRecord("D", int(q), rnd) for q in data])


def _observables(c: CircuitIR, logicals: BitMatrix, rnd: int) -> None:
    idx = c.meas_index()
    for row in logicals.to_dense():
        c.observables.append(tuple(idx[("D", int(q), rnd)] for q in np.flatnonzero(row)))


def build_bb_memory(code: BBCode, placement: Placement, classification: GeneratorClassification,
                    plan: RoutingPlan, table: PurifyTable, noise: NoiseModel, rounds: int, t_m: int,
                    seed: int = 0, basis: str = "Z", idle: bool = True) -> CircuitIR:
    """Masked BB syndrome extraction with effective long-range CNOTs.

    Args:
        plan: Supplies ``steps_short``/``steps_long`` for the depth ledger and
            the aggregated idle noise.
        table: Per-distance purification success and effective CNOT error;
            must cover every routed coupling distance.
        t_m: Long checks are attempted in rounds that are multiples of ``t_m``.
        seed: Seeds the purification-failure masking.
        basis: ``Z`` (reset to ``|0..0>``, logical Z observables) or ``X``.
        idle: Set ``False`` to drop the aggregated idle noise.
    """
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    if t_m < 1:
        raise ValueError("t_m must be >= 1")
    if basis not in ("X", "Z"):
        raise ValueError("basis must be X or Z")
    n, n0 = code.n, code.n_checks
    info = coupling_info(placement)
    for kind in ("X", "Z"):
        for d in np.unique(info.distance[kind][info.routed[kind]]):
            if int(d) not in table:
                raise KeyError(f"purification table has no entry for chain length {int(d)}")
    supports = {"X": placement.x_support, "Z": placement.z_support}
    long = {"X": classification.x_long.copy(), "Z": classification.z_long.copy()}
    success = _check_success(info, table)
    schedule = sample_mask_schedule(long, success, t_m, rounds, np.random.default_rng(seed))

    coupling_p = {}
    for kind in ("X", "Z"):
        pk = np.full(info.distance[kind].shape, noise.p2)
        for (ci, k), d in np.ndenumerate(info.distance[kind]):
            if info.routed[kind][ci, k]:
                pk[ci, k] = table[int(d)].cnot_error
        coupling_p[kind] = pk
    # couplings in term order; each layer then permutes the data qubits
    order = list(range(6))

    c = CircuitIR(n + 2 * n0, schedule=schedule)
    c.meta.update({
        "code": f"[[{code.n},{code.k}]]", "spec": str(code.spec).replace(" ", ","), "basis": basis,
        "t": str(rounds), "t_m": str(t_m), "p": repr(noise.p), "idle": "on" if idle else "off",
        "coupling_order": "A1,A2,A3,B1,B2,B3", "plan_source": plan.source,
        "steps_short": str(plan.steps_short), "steps_long": str(plan.steps_long), "seed": str(seed),
    })
    data = np.arange(n)
    c.begin_round(0)
    _data_prep(c, data, basis)
    everyone = {k: np.ones(n0, dtype=bool) for k in ("X", "Z")}
    _emit_extraction(c, n, n0, supports, everyone, 0, None, None, order)
    for r in range(1, rounds + 1):
        c.begin_round(r)
        attempted_long = r % t_m == 0
        steps = plan.round_steps(attempted_long)
        c.depth[r] = PHYSICAL_DEPTH_PER_STEP * steps
        c.add("depolarize1", data, noise.p_data)
        if idle:
            c.add("idle-depolarize", data, min(1.0, c.depth[r] * noise.p_idle))
        active = {k: schedule.available[k][r] for k in ("X", "Z")}
        _emit_extraction(c, n, n0, supports, active, r, noise, coupling_p, order)
    c.begin_round(rounds + 1)
    _emit_extraction(c, n, n0, supports, everyone, rounds + 1, None, None, order)
    _data_readout(c, data, basis, rounds + 1)
    _observables(c, code.logical_z if basis == "Z" else code.logical_x, rounds + 1)
    return c


# --- rotated surface code --------------------------------------------------------


@dataclass(frozen=True)
class SurfaceLayout:
    """Rotated distance-``d`` patch; coordinates are doubled (data on odd sites)."""

    d: int
    data_pos: np.ndarray
    x_pos: np.ndarray
    z_pos: np.ndarray
    x_order: np.ndarray  # (n_x, 4) data index or -1, per CNOT layer
    z_order: np.ndarray
    h_x: BitMatrix
    h_z: BitMatrix
    logical_x: BitMatrix
    logical_z: BitMatrix

    @property
    def n(self) -> int:
        return self.d * self.d


# CNOT layer offsets (drow, dcol) from ancilla to data. X checks trace a "Z"
# and Z checks an "N" so hook errors run perpendicular to the matching logical.
X_ORDER = [(-1, -1), (-1, 1), (1, -1), (1, 1)]
Z_ORDER = [(-1, -1), (1, -1), (-1, 1), (1, 1)]


def surface_layout(d: int) -> SurfaceLayout:
    if d < 3 or d % 2 == 0:
        raise ValueError("surface code distance must be odd and >= 3")
    data_index = {}
    data_pos = []
    for r in range(d):
        for col in range(d):
            data_index[(2 * r + 1, 2 * col + 1)] = len(data_pos)
            data_pos.append((2 * r + 1, 2 * col + 1))
    xs, zs = [], []
    for r in range(d + 1):
        for col in range(d + 1):
            kind = "X" if (r + col) % 2 == 0 else "Z"
            top_bottom = r in (0, d)
            left_right = col in (0, d)
            if top_bottom and left_right:
                continue
            if top_bottom and kind != "X":
                continue
            if left_right and kind != "Z":
                continue
            (xs if kind == "X" else zs).append((2 * r, 2 * col))

    def orders(sites, offsets):
        out = np.full((len(sites), 4), -1, dtype=np.int64)
        for i, (r, col) in enumerate(sites):
            for k, (dr, dc) in enumerate(offsets):
                out[i, k] = data_index.get((r + dr, col + dc), -1)
        return out

    xo, zo = orders(xs, X_ORDER), orders(zs, Z_ORDER)
    n = d * d
    h_x = BitMatrix.from_supports(n, [[q for q in row if q >= 0] for row in xo])
    h_z = BitMatrix.from_supports(n, [[q for q in row if q >= 0] for row in zo])
    lx, lz = css_logicals(h_x, h_z)
    return SurfaceLayout(d, np.array(data_pos), np.array(xs), np.array(zs), xo, zo, h_x, h_z, lx, lz)


SURFACE_DEPTH = 8  # reset, H, four CNOT layers, H, measure


def build_surface_memory(d: int, noise: NoiseModel, rounds: int, basis: str = "Z",
                         idle: bool = True) -> CircuitIR:
    """Rotated surface-code memory with interleaved four-layer extraction."""
    lay = surface_layout(d)
    n = lay.n
    nx, nz = len(lay.x_pos), len(lay.z_pos)
    x_anc = n + np.arange(nx)
    z_anc = n + nx + np.arange(nz)
    data = np.arange(n)
    c = CircuitIR(n + nx + nz)
    c.meta.update({"code": f"surface d={d}", "basis": basis, "t": str(rounds), "p": repr(noise.p),
                   "idle": "on" if idle else "off", "order": "tomita-svore"})

    def extraction(rnd: int, nz_: NoiseModel | None):
        p_reset = nz_.p_reset if nz_ else 0.0
        p1 = nz_.p1 if nz_ else 0.0
        p2 = nz_.p2 if nz_ else 0.0
        anc = np.concatenate([x_anc, z_anc])
        c.add("reset", anc, p_reset)
        c.add("h", x_anc)
        c.add("depolarize1", x_anc, p1)
        for k in range(4):
            pairs = []
            for i, q in enumerate(lay.x_order[:, k]):
                if q >= 0:
                    pairs += [x_anc[i], q]
            for i, q in enumerate(lay.z_order[:, k]):
                if q >= 0:
                    pairs += [q, z_anc[i]]
            c.add("cnot", pairs)
            c.add("depolarize2", pairs, p2)
        c.add("h", x_anc)
        c.add("depolarize1", x_anc, p1)
        recs = [MeasRecord("X", i, rnd) for i in range(nx)] + [MeasRecord("Z", i, rnd) for i in range(nz)]
        c.measure(anc, recs, nz_.p_meas if nz_ else 0.0)

    c.begin_round(0)
    _data_prep(c, data, basis)
    extraction(0, None)
    for r in range(1, rounds + 1):
        c.begin_round(r)
        c.depth[r] = SURFACE_DEPTH
        c.add("depolarize1", data, noise.p_data)
        if idle:
            c.add("idle-depolarize", data, min(1.0, SURFACE_DEPTH * noise.p_idle))
        extraction(r, noise)
    c.begin_round(rounds + 1)
    extraction(rounds + 1, None)
    _data_readout(c, data, basis, rounds + 1)
    _observables(c, lay.logical_z if basis == "Z" else lay.logical_x, rounds + 1)
    return c
