"""Experiment configuration, sweeps over round counts and results files."""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .bbcode import BBCode, BBCodeSpec, build_code, estimate_distance
from .circuit import CircuitIR, build_bb_memory, build_surface_memory, coupling_info
from .decode import BPConfig, OSDConfig, combine_surface_copies, fit_epsilon, run_experiment
from .layout import GeneratorClassification, Placement, classify_generators, embed, enumerate_toric_layouts, make_layout
from .noise import NoiseModel
from .presets import ALIASES, PRESETS, get_preset
from .purify import PurifyTable, build_purify_table
from .router import (GridGraph, RoutingPlan, greedy_route, load_manual_schedule, operators_from_placement,
                     plan_for_placement, table_plan)

RESULT_COLUMNS = ["code", "n", "k", "d", "qubits", "t", "t_m", "shots", "failures", "p_log", "stderr"]


class ConfigError(ValueError):
    pass


def _parse_bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _parse_ints(v: str) -> tuple[int, ...]:
    return tuple(int(x) for x in v.replace(" ", "").split(",") if x)


@dataclass(frozen=True)
class ExperimentConfig:
    """One memory-experiment sweep.

    ``code`` is a preset name (``bb72`` ... ``bb196``, ``gross``), a BB spec
    line such as ``ell=12 m=3 A=x9+y1+y2 B=1+x1+x11``, or ``surface:d`` for
    ``copies`` independent rotated surface-code patches.
    """

    code: str = "bb72"
    t: tuple[int, ...] = (4, 8, 12)
    t_m: int = 5
    p: float = 0.001
    two_qubit: float = 1.0
    single_qubit: float = 0.1
    measure: float = 1.0
    reset: float = 0.1
    idle_rate: float = 0.02
    data: float = 1.0
    idle: bool = True
    shots: int = 10_000
    batch: int = 1000
    seed: int = 0
    copies: int = 1
    basis: str = "Z"
    table_shots: int = 100_000
    schedule: str | None = None
    output: str = "results"
    bp_iterations: int = 100
    bp_scaling: float = 0.625
    bp_schedule: str = "flooding"
    osd_order: int = 10

    def __post_init__(self):
        if not self.t or any(t < 1 for t in self.t):
            raise ConfigError("t must list positive round counts")
        if self.t_m < 1 or self.shots < 1 or self.batch < 1 or self.copies < 1:
            raise ConfigError("t_m, shots, batch and copies must be positive")
        if self.basis not in ("X", "Z"):
            raise ConfigError("basis must be X or Z")

    @property
    def noise(self) -> NoiseModel:
        return NoiseModel(self.p, self.two_qubit, self.single_qubit, self.measure, self.reset,
                          self.idle_rate, self.data)

    @property
    def bp(self) -> BPConfig:
        return BPConfig(self.bp_iterations, self.bp_scaling, self.bp_schedule)

    @property
    def osd(self) -> OSDConfig:
        return OSDConfig(self.osd_order)

    @property
    def is_surface(self) -> bool:
        return self.code.startswith("surface:")

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in fields(cls)}
        values: dict = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            values[key] = val
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**{k: _coerce(types[k], v, k) for k, v in values.items()})

    def to_text(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(map(str, v))
            elif isinstance(v, bool):
                v = "on" if v else "off"
            out.append(f"{f.name} = {v}")
        return "\n".join(out) + "\n"


def _coerce(typ: str, v, key: str):
    if not isinstance(v, str):
        return v
    try:
        if typ.startswith("tuple"):
            return _parse_ints(v)
        if typ == "bool":
            return _parse_bool(v)
        if typ == "int":
            return int(v)
        if typ == "float":
            return float(v)
        if v.lower() == "none":
            return None
        return v
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


@dataclass(frozen=True)
class ResultRow:
    code: str
    n: int
    k: int
    d: int
    qubits: int
    t: int
    t_m: int
    shots: int
    failures: int
    p_log: float
    stderr: float

    def as_list(self) -> list:
        return [self.code, self.n, self.k, self.d, self.qubits, self.t, self.t_m, self.shots,
                self.failures, f"{self.p_log:.8g}", f"{self.stderr:.8g}"]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in rows:
        w.writerow(r.as_list())
    return buf.getvalue()


def rows_from_csv(text: str) -> list[ResultRow]:
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        if set(RESULT_COLUMNS) - set(rec):
            raise ConfigError("results file is missing columns")
        out.append(ResultRow(rec["code"], int(rec["n"]), int(rec["k"]), int(rec["d"]), int(rec["qubits"]),
                             int(rec["t"]), int(rec["t_m"]), int(rec["shots"]), int(rec["failures"]),
                             float(rec["p_log"]), float(rec["stderr"])))
    return out


def bb_qubits(n: int) -> int:
    """Data layer plus check sites plus a full routing layer."""
    return 4 * n


def surface_qubits(d: int, copies: int = 1) -> int:
    return copies * (2 * d * d - 1)


# --- setups --------------------------------------------------------------------------


@dataclass(frozen=True)
class BBSetup:
    """Everything a BB circuit build needs apart from the per-realization seed."""

    label: str
    code: BBCode
    d: int
    placement: Placement
    classification: GeneratorClassification
    plan: RoutingPlan
    table: PurifyTable = field(repr=False)


def resolve_code(code: str) -> tuple[str, BBCode, int | None, tuple[int, int, int, int] | None, RoutingPlan | None]:
    """Code, reference distance, embedding and reference plan for a preset or spec line."""
    name = ALIASES.get(code, code)
    if name in PRESETS:
        pre = get_preset(name)
        return pre.label, build_code(pre.spec), pre.d, pre.embedding, table_plan(pre.steps_short, pre.steps_long)
    if "=" not in code:
        raise ConfigError(f"unknown preset {code!r}; choose from {sorted(PRESETS) + sorted(ALIASES)}")
    try:
        spec = BBCodeSpec.parse(code)
    except ValueError as exc:
        raise ConfigError(f"unknown preset or malformed code spec {code!r}: {exc}") from exc
    return str(spec), build_code(spec), None, None, None


def bb_setup(cfg: ExperimentConfig) -> BBSetup:
    label, code, d, emb, plan = resolve_code(cfg.code)
    if emb is None:
        layouts = enumerate_toric_layouts(code)
        if not layouts:
            raise ConfigError(f"{label} has no toric layout")
        layout = layouts[0]
    else:
        layout = make_layout(code, *emb)
    placement = embed(code, layout)
    cls = classify_generators(placement)
    if cfg.schedule:
        plan = _schedule_plan(Path(cfg.schedule).read_text(), placement, cls)
    elif plan is None:
        plan = plan_for_placement(placement, cls, "Z", purified=True)
    if d is None:
        d = estimate_distance(code, 200, cfg.seed).upper_bound
    info = coupling_info(placement)
    max_len = int(max(v.max() for v in info.distance.values()))
    table = _purify_table(cfg.noise, max_len, cfg.table_shots, cfg.seed)
    return BBSetup(label, code, d, placement, cls, plan, table)


def _schedule_plan(text: str, placement: Placement, cls) -> RoutingPlan:
    """Short-range Z paths, then optionally a ``LONG`` line and the long-range paths.

    Without a long section the long checks are routed greedily.
    """
    grid = GridGraph(placement.height, placement.width)
    short_text, _, long_text = text.partition("\nLONG\n")
    short = load_manual_schedule(short_text, operators_from_placement(placement, "Z", "short", cls), grid, True)
    long_ops = operators_from_placement(placement, "Z", "long", cls)
    if long_text.strip():
        longp = load_manual_schedule(long_text, long_ops, grid, True)
    else:
        longp = greedy_route(long_ops, grid, True)
    return RoutingPlan(short.steps + longp.steps, short.steps_short, len(longp.steps), "manual")


@lru_cache(maxsize=8)
def _purify_table(noise: NoiseModel, max_len: int, shots: int, seed: int) -> PurifyTable:
    return build_purify_table(max_len, noise, shots, seed)


def build_circuit(cfg: ExperimentConfig, t: int, circuit_seed: int, setup: BBSetup | None = None) -> CircuitIR:
    if cfg.is_surface:
        d = _surface_distance(cfg)
        return build_surface_memory(d, cfg.noise, t, cfg.basis, cfg.idle)
    setup = setup or bb_setup(cfg)
    return build_bb_memory(setup.code, setup.placement, setup.classification, setup.plan, setup.table,
                           cfg.noise, t, cfg.t_m, circuit_seed, cfg.basis, cfg.idle)


def _surface_distance(cfg: ExperimentConfig) -> int:
    try:
        d = int(cfg.code.split(":", 1)[1])
    except ValueError as exc:
        raise ConfigError(f"bad surface code {cfg.code!r}") from exc
    if d < 2:
        raise ConfigError("surface distance must be >= 2")
    return d


def run_config(cfg: ExperimentConfig, progress=None) -> list[ResultRow]:
    """One row per entry of ``cfg.t``.

    Surface rows simulate a single patch and report the ``copies``-patch
    failure rate; ``failures`` stays the single-patch count.
    """
    sectors = (cfg.basis,) if cfg.basis == "Z" else ("X",)
    rows = []
    if cfg.is_surface:
        d = _surface_distance(cfg)
        label, n, k, qubits = f"surface-d{d}x{cfg.copies}", d * d, cfg.copies, surface_qubits(d, cfg.copies)
        setup = None
    else:
        setup = bb_setup(cfg)
        label, n, k, d, qubits = setup.label, setup.code.n, setup.code.k, setup.d, bb_qubits(setup.code.n)
    for t in cfg.t:
        res = run_experiment(lambda s, t=t: build_circuit(cfg, t, s, setup), cfg.shots,
                             seed=_sweep_seed(cfg.seed, t), batch=cfg.batch, sectors=sectors,
                             bp=cfg.bp, osd=cfg.osd)
        p, se = res.p_log, res.stderr
        if cfg.is_surface and cfg.copies > 1:
            pk = combine_surface_copies(p, cfg.copies)
            se = cfg.copies * (1 - p) ** (cfg.copies - 1) * se
            p = pk
        rows.append(ResultRow(label, n, k, d, qubits, t, cfg.t_m, cfg.shots, res.failures, p, se))
        if progress:
            progress(rows[-1])
    return rows


def _sweep_seed(seed: int, t: int) -> int:
    return int(np.random.SeedSequence([seed, t]).generate_state(1)[0])


@dataclass(frozen=True)
class FitResult:
    code: str
    epsilon: float
    stderr: float
    points: tuple[tuple[int, float], ...]
    residuals: tuple[float, ...]

    def format(self) -> str:
        pts = ", ".join(f"[{t}, {p:.6g}]" for t, p in self.points)
        res = ", ".join(f"{r:.3g}" for r in self.residuals)
        return (f'{{"code": "{self.code}", "epsilon_L": {self.epsilon:.6g}, "stderr": {self.stderr:.3g}, '
                f'"points": [{pts}], "residuals": [{res}]}}')


def fit_rows(rows) -> list[FitResult]:
    """Per-code fit of the per-round rate; residuals are ``p_log - model``.

    The standard error propagates each point's binomial error through the
    ``log(1 - p_log)`` transform into the through-origin slope.
    """
    groups: dict[str, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault(r.code, []).append(r)
    if not groups:
        raise ConfigError("no result rows to fit")
    out = []
    for code, rs in groups.items():
        pts = tuple((r.t, r.p_log) for r in rs)
        eps = fit_epsilon(pts)
        res = tuple(p - (1 - (1 - eps) ** t) for t, p in pts)
        t = np.array([r.t for r in rs], dtype=float)
        var_y = np.array([(r.stderr / (1 - r.p_log)) ** 2 for r in rs])
        se = (1 - eps) * float(np.sqrt((t * t * var_y).sum()) / (t * t).sum())
        out.append(FitResult(code, eps, se, pts, res))
    return out


def run_config_cached(cfg: ExperimentConfig, cache_dir: str | Path, progress=None) -> list[ResultRow]:
    """:func:`run_config` memoised on disk by the full config text.

    Runs are deterministic in the config, so a stored CSV is the result the
    run would produce again.
    """
    key = hashlib.sha256(replace(cfg, output="").to_text().encode()).hexdigest()[:16]
    path = Path(cache_dir) / f"{key}.csv"
    if path.exists():
        return rows_from_csv(path.read_text())
    rows = run_config(cfg, progress)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rows_to_csv(rows))
    path.with_suffix(".cfg").write_text(cfg.to_text())
    return rows


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})


def write_results(rows, fits, out_dir: str | Path, cfg: ExperimentConfig | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(rows_to_csv(rows))
    (out / "fit.txt").write_text("\n".join(f.format() for f in fits) + "\n")
    if cfg is not None:
        (out / "config.txt").write_text(cfg.to_text())
    return out
