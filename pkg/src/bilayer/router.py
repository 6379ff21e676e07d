"""Teleportation routing on the bilayer grid.

The data layer holds qubits and check ancillas; each site has a routing
ancilla directly beneath it. A coupling between a data qubit and a check that
are not grid neighbours is implemented by a Bell chain along a path of
routing ancillas from below the qubit to below the check. Paths inside one
routing step must be vertex-disjoint.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .layout import GeneratorClassification, Placement

PHYSICAL_DEPTH_PER_STEP = 11  # 6 Bell generation + 2 purification + 3 teleported CNOT


@dataclass(frozen=True)
class GridGraph:
    """Planar ``height x width`` data layer with ``layers`` routing layers below it."""

    height: int
    width: int
    layers: int = 1

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.layers < 1:
            raise ValueError("grid dimensions and layer count must be positive")

    @property
    def n_sites(self) -> int:
        return self.height * self.width

    @property
    def m(self) -> int:
        return max(self.height, self.width)

    def vertex(self, r: int, c: int) -> int:
        return int(r) * self.width + int(c)

    def coords(self, v: int) -> tuple[int, int]:
        return divmod(int(v), self.width)

    def neighbours(self, v: int) -> list[int]:
        """Up, down, left, right (the fixed BFS order)."""
        r, c = divmod(v, self.width)
        out = []
        if r > 0:
            out.append(v - self.width)
        if r < self.height - 1:
            out.append(v + self.width)
        if c > 0:
            out.append(v - 1)
        if c < self.width - 1:
            out.append(v + 1)
        return out

    @property
    def layer_edges(self) -> int:
        return self.height * (self.width - 1) + self.width * (self.height - 1)

    @property
    def edge_budget(self) -> int:
        """Transport edges usable per step (vertical couplers excluded)."""
        return self.layers * self.layer_edges

    def distance(self, u: int, v: int) -> int:
        (r0, c0), (r1, c1) = self.coords(u), self.coords(v)
        return abs(r0 - r1) + abs(c0 - c1)


@dataclass(frozen=True)
class Operator:
    """A Pauli measurement: data qubits (ids and grid sites) read out at ``check_site``."""

    op_id: int
    check_site: int
    qubit_ids: tuple[int, ...]
    qubit_sites: tuple[int, ...]


@dataclass(frozen=True)
class Path:
    op_id: int
    qubit_id: int
    vertices: tuple[int, ...]
    layer: int = 0
    donor: bool = False


@dataclass(frozen=True)
class RoutingStep:
    paths: tuple[Path, ...]
    completed: tuple[int, ...]


@dataclass(frozen=True)
class RoutingPlan:
    """Routing steps plus depth accounting.

    ``steps_short``/``steps_long`` count the steps for the always-measured and
    the masked generators of one check type. ``source`` records where the
    counts came from: ``greedy``, ``manual`` or ``table``.
    """

    steps: tuple[RoutingStep, ...] = ()
    steps_short: int = 0
    steps_long: int = 0
    source: str = "greedy"

    @property
    def total_steps(self) -> int:
        return self.steps_short + self.steps_long

    @property
    def physical_depth(self) -> int:
        return PHYSICAL_DEPTH_PER_STEP * self.total_steps

    def round_steps(self, long_included: bool) -> int:
        """Routing steps of one full round (X and Z checks measured in sequence)."""
        return 2 * (self.steps_short + (self.steps_long if long_included else 0))


@dataclass(frozen=True)
class LowerBoundCertificate:
    """Sound step bounds; ``bound_steps`` is the largest of them.

    ``edge_bound`` divides the total transport demand by the per-step edge
    budget. ``vertex_bound`` does the same with path vertices, since
    vertex-disjoint paths in one step cover at most every routing ancilla
    once. ``endpoint_bound`` counts paths that must end on a single vertex,
    and ``cut_bound`` counts paths that must cross one row or column cut,
    which has only ``width`` (or ``height``) vertices per layer.
    """

    total_required_edges: int
    available_edges_per_step: int
    edge_bound: int
    endpoint_bound: int
    vertex_bound: int = 0
    cut_bound: int = 0
    beta: float = float("nan")
    gamma_mean: float = float("nan")
    gamma_max: float = float("nan")

    @property
    def bound_steps(self) -> int:
        return max(self.edge_bound, self.endpoint_bound, self.vertex_bound, self.cut_bound)


class RoutingError(RuntimeError):
    pass


class ScheduleError(ValueError):
    pass


def operators_from_placement(p: Placement, kind: str, which: str = "all",
                             classification: GeneratorClassification | None = None) -> list[Operator]:
    """Operators for the ``kind`` checks of a placement.

    Args:
        which: ``all``, ``short`` or ``long``; the latter two need ``classification``.
    """
    W = p.width
    pos = p.check_pos(kind)
    sup = p.check_support(kind)
    if which == "all":
        ids = range(len(pos))
    else:
        if classification is None:
            raise ValueError("short/long selection needs a classification")
        long = classification.x_long if kind == "X" else classification.z_long
        ids = np.flatnonzero(long if which == "long" else ~long)
    ops = []
    for c in ids:
        qs = tuple(int(q) for q in sup[c])
        sites = tuple(int(p.qubit_pos[q][0] * W + p.qubit_pos[q][1]) for q in qs)
        ops.append(Operator(int(c), int(pos[c][0] * W + pos[c][1]), qs, sites))
    return ops


def _routed(op: Operator, grid: GridGraph) -> list[int]:
    """Indices into ``op.qubit_ids`` of couplings that need a path."""
    return [k for k, s in enumerate(op.qubit_sites) if grid.distance(s, op.check_site) > 1]


def _bfs(grid: GridGraph, src: int, dst: int, blocked: np.ndarray) -> list[int] | None:
    if blocked[src] or blocked[dst]:
        return None
    if src == dst:
        return [src]
    prev = np.full(grid.n_sites, -1, dtype=np.int64)
    prev[src] = src
    q = deque([src])
    while q:
        v = q.popleft()
        for u in grid.neighbours(v):
            if prev[u] >= 0 or blocked[u]:
                continue
            prev[u] = v
            if u == dst:
                path = [u]
                while path[-1] != src:
                    path.append(int(prev[path[-1]]))
                return path[::-1]
            q.append(u)
    return None


def _donor_endpoints(grid: GridGraph, v: int, blocked: np.ndarray) -> list[int]:
    return [u for u in grid.neighbours(v) if not blocked[u]]


def greedy_route(ops: Sequence[Operator], grid: GridGraph, purified: bool = False,
                 max_steps: int = 10_000) -> RoutingPlan:
    """Greedy step-by-step packing of vertex-disjoint paths.

    Each step sorts incomplete operators by how many couplings they already
    have (most first) and searches a shortest free path for each missing
    coupling. Operators whose couplings are all done are measured at the end
    of the step. With ``purified`` each path needs a parallel donor path
    between free neighbours of its endpoints.
    """
    need = {op.op_id: set(_routed(op, grid)) for op in ops}
    by_id = {op.op_id: op for op in ops}
    if len(by_id) != len(ops):
        raise ValueError("operator ids must be unique")
    done_count = {op.op_id: len(op.qubit_ids) - len(need[op.op_id]) for op in ops}
    pending = [op.op_id for op in ops]
    steps: list[RoutingStep] = []
    while pending:
        if len(steps) >= max_steps:
            raise RoutingError("routing did not terminate")
        blocked = [np.zeros(grid.n_sites, dtype=bool) for _ in range(grid.layers)]
        paths: list[Path] = []
        order = sorted(pending, key=lambda o: (-done_count[o], o))
        for oid in order:
            op = by_id[oid]
            for k in sorted(need[oid]):
                src, dst = op.qubit_sites[k], op.check_site
                for layer in range(grid.layers):
                    found = _route_one(grid, src, dst, blocked[layer], purified)
                    if found is None:
                        continue
                    main, donor = found
                    paths.append(Path(oid, op.qubit_ids[k], tuple(main), layer))
                    if donor is not None:
                        paths.append(Path(oid, op.qubit_ids[k], tuple(donor), layer, donor=True))
                    need[oid].discard(k)
                    done_count[oid] += 1
                    break
        completed = tuple(o for o in order if not need[o])
        if not paths and not completed:
            raise RoutingError("no operator made progress; grid cannot route the remaining couplings")
        steps.append(RoutingStep(tuple(paths), completed))
        pending = [o for o in pending if need[o]]
    return RoutingPlan(tuple(steps), steps_short=len(steps), steps_long=0, source="greedy")


def _route_one(grid: GridGraph, src: int, dst: int, blocked: np.ndarray, purified: bool):
    path = _bfs(grid, src, dst, blocked)
    if path is None:
        return None
    if not purified:
        blocked[path] = True
        return path, None
    blocked[path] = True
    for a in _donor_endpoints(grid, src, blocked):
        for b in _donor_endpoints(grid, dst, blocked):
            if a == b:
                continue
            donor = _bfs(grid, a, b, blocked)
            if donor is not None:
                blocked[donor] = True
                return path, donor
    blocked[path] = False
    return None


def lower_bound(ops: Sequence[Operator], grid: GridGraph, purified: bool = False,
                classification: GeneratorClassification | None = None) -> LowerBoundCertificate:
    """Sound lower bound on the number of routing steps for ``ops``.

    The transport demand of a coupling is at least the Manhattan distance of
    its endpoints, so the sum over couplings divided by the edge budget bounds
    the step count. Every path also occupies both of its endpoint vertices,
    which caps the paths touching one vertex at ``layers`` per step.
    """
    mult = 2 if purified else 1
    total = 0
    vertices = 0
    endpoint_load: dict[int, int] = {}
    row_cut = np.zeros(grid.height + 1, dtype=np.int64)
    col_cut = np.zeros(grid.width + 1, dtype=np.int64)
    for op in ops:
        for k in _routed(op, grid):
            s = op.qubit_sites[k]
            d = grid.distance(s, op.check_site)
            total += mult * d
            vertices += mult * (d + 1)
            for v in (s, op.check_site):
                endpoint_load[v] = endpoint_load.get(v, 0) + 1
            (r0, c0), (r1, c1) = grid.coords(s), grid.coords(op.check_site)
            row_cut[min(r0, r1) + 1 : max(r0, r1) + 1] += mult
            col_cut[min(c0, c1) + 1 : max(c0, c1) + 1] += mult
    budget = grid.edge_budget
    edge_bound = math.ceil(total / budget) if total else 0
    vertex_bound = math.ceil(vertices / (grid.layers * grid.n_sites)) if vertices else 0
    endpoint_bound = math.ceil(max(endpoint_load.values()) / grid.layers) if endpoint_load else 0
    cut_bound = max(
        math.ceil(row_cut.max() / (grid.layers * grid.width)),
        math.ceil(col_cut.max() / (grid.layers * grid.height)),
    )
    if classification is not None:
        beta, gm, gx = classification.beta, float(classification.gamma.mean()), float(classification.gamma.max())
    else:
        beta = gm = gx = float("nan")
    return LowerBoundCertificate(total, budget, edge_bound, endpoint_bound, vertex_bound, cut_bound, beta, gm, gx)


def savings(steps_short: int, steps_long: int, period: float) -> float:
    """Percent cycle-depth reduction from measuring long checks every ``period`` rounds."""
    if steps_short < 1 or steps_long < 1 or period < 1:
        raise ValueError("need steps_short, steps_long >= 1 and period >= 1")
    s, l = steps_short, steps_long
    if math.isinf(period):
        return 100.0 * l / (s + l)
    masked = (period - 1) * 2 * s + 2 * (s + l)
    full = period * 2 * (s + l)
    return 100.0 * (1.0 - masked / full)


def plan_for_placement(p: Placement, classification: GeneratorClassification, kind: str = "Z",
                       purified: bool = True, layers: int = 1) -> RoutingPlan:
    """Greedy plan for the short checks, then the long checks, of one type."""
    grid = GridGraph(p.height, p.width, layers)
    short = greedy_route(operators_from_placement(p, kind, "short", classification), grid, purified)
    longp = greedy_route(operators_from_placement(p, kind, "long", classification), grid, purified)
    return RoutingPlan(short.steps + longp.steps, len(short.steps), len(longp.steps), "greedy")


def table_plan(steps_short: int, steps_long: int) -> RoutingPlan:
    """Plan carrying only reference step counts, without explicit paths."""
    return RoutingPlan((), steps_short, steps_long, "table")


# --- schedule files -------------------------------------------------------------


def format_schedule(plan: RoutingPlan) -> str:
    lines = []
    for k, step in enumerate(plan.steps):
        lines.append(f"STEP {k}")
        for path in step.paths:
            tag = "DONOR" if path.donor else "PATH"
            lines.append(f"{tag} {path.op_id} {path.qubit_id} " + " ".join(map(str, path.vertices)))
    return "\n".join(lines) + ("\n" if lines else "")


def load_manual_schedule(text: str, ops: Sequence[Operator], grid: GridGraph,
                         purified: bool = False) -> RoutingPlan:
    """Parse and validate a hand-written schedule.

    Lines are ``STEP k``, ``PATH op_id qubit_id v0 ... vk`` and, for purified
    schedules, ``DONOR op_id qubit_id v0 ... vk``. Vertices index the routing
    layer as ``row * width + col``. ``#`` starts a comment.

    Raises:
        ScheduleError: naming the offending step for overlapping, broken or
            misplaced paths, or listing couplings that were never routed.
    """
    by_id = {op.op_id: op for op in ops}
    need = {(op.op_id, op.qubit_ids[k]): op for op in ops for k in _routed(op, grid)}
    routed: set[tuple[int, int]] = set()
    donors: set[tuple[int, int]] = set()
    steps: list[list[Path]] = []
    step_names: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "STEP":
            steps.append([])
            step_names.append(tok[1] if len(tok) > 1 else str(len(steps) - 1))
            continue
        if tok[0] not in ("PATH", "DONOR"):
            raise ScheduleError(f"line {lineno}: unknown record {tok[0]!r}")
        if not steps:
            raise ScheduleError(f"line {lineno}: path before the first STEP")
        try:
            oid, qid, verts = int(tok[1]), int(tok[2]), tuple(int(v) for v in tok[3:])
        except (IndexError, ValueError) as exc:
            raise ScheduleError(f"line {lineno}: malformed path") from exc
        steps[-1].append(Path(oid, qid, verts, 0, tok[0] == "DONOR"))

    for name, paths in zip(step_names, steps):
        used: set[int] = set()
        for path in paths:
            where = f"step {name}, op {path.op_id} qubit {path.qubit_id}"
            if path.op_id not in by_id or path.qubit_id not in by_id[path.op_id].qubit_ids:
                raise ScheduleError(f"{where}: no such coupling")
            if not path.vertices or any(not 0 <= v < grid.n_sites for v in path.vertices):
                raise ScheduleError(f"{where}: vertex outside the grid")
            for a, b in zip(path.vertices, path.vertices[1:]):
                if grid.distance(a, b) != 1:
                    raise ScheduleError(f"{where}: vertices {a} and {b} are not adjacent")
            overlap = used.intersection(path.vertices)
            if overlap or len(set(path.vertices)) != len(path.vertices):
                raise ScheduleError(f"step {name}: paths overlap at vertex {sorted(overlap or path.vertices)[0]}")
            used.update(path.vertices)
            op = by_id[path.op_id]
            k = op.qubit_ids.index(path.qubit_id)
            src, dst = op.qubit_sites[k], op.check_site
            ends = (path.vertices[0], path.vertices[-1])
            key = (path.op_id, path.qubit_id)
            if path.donor:
                if grid.distance(ends[0], src) != 1 or grid.distance(ends[1], dst) != 1:
                    raise ScheduleError(f"{where}: donor path must start and end next to the source path")
                donors.add(key)
            else:
                if ends != (src, dst):
                    raise ScheduleError(f"{where}: path must run from below the qubit to below the check")
                if key in routed:
                    raise ScheduleError(f"{where}: coupling routed twice")
                routed.add(key)
    missing = set(need) - routed
    if missing:
        raise ScheduleError(f"unrouted couplings: {sorted(missing)[:5]}")
    if purified and routed - donors:
        raise ScheduleError(f"couplings without donor path: {sorted(routed - donors)[:5]}")

    out_steps = []
    finished: set[int] = set()
    remaining = {oid: {q for (o, q) in need if o == oid} for oid in by_id}
    for paths in steps:
        for path in paths:
            if not path.donor:
                remaining[path.op_id].discard(path.qubit_id)
        done = tuple(o for o in by_id if not remaining[o] and o not in finished)
        finished.update(done)
        out_steps.append(RoutingStep(tuple(paths), done))
    return RoutingPlan(tuple(out_steps), len(out_steps), 0, "manual")


def routed_couplings(ops: Iterable[Operator], grid: GridGraph) -> int:
    return sum(len(_routed(op, grid)) for op in ops)
