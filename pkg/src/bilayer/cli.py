"""Command-line entry point: ``bilayer <subcommand> ...``."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import __version__
from .bbcode import estimate_distance
from .circuit import CircuitIR
from .decode import BPOSDDecoder
from .detector import build_detector_model, pack_shots, sample_shots, unpack_shots
from .experiment import (ConfigError, ExperimentConfig, bb_setup, build_circuit, fit_rows, resolve_code,
                         rows_from_csv, rows_to_csv, run_config, write_results)
from .layout import InvalidLayoutError, toric_conditions, classify_generators, embed, enumerate_toric_layouts, make_layout
from .noise import NoiseModel
from .plots import PlotError, emit_plots
from .purify import build_purify_table
from .router import (GridGraph, RoutingError, ScheduleError, format_schedule, greedy_route, load_manual_schedule,
                     lower_bound, operators_from_placement, savings)


def _code_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--preset", help="named code, e.g. bb72 or gross")
    g.add_argument("--code", help='spec line, e.g. "ell=12 m=3 A=x9+y1+y2 B=1+x1+x11"')


def _code_key(args) -> str:
    return args.preset or args.code or "bb72"


def _placement(args):
    label, code, d, emb, plan = resolve_code(_code_key(args))
    if getattr(args, "layout", None):
        emb = tuple(int(x) for x in args.layout.split(","))
    if emb is None:
        layouts = enumerate_toric_layouts(code)
        if not layouts:
            raise ConfigError(f"{label} has no toric layout")
        layout = layouts[0]
    else:
        layout = make_layout(code, *emb)
    return label, code, d, layout, plan, embed(code, layout)


def cmd_code_info(args) -> int:
    label, code, d, layout, plan, placement = _placement(args)
    cls = classify_generators(placement)
    est = estimate_distance(code, args.iterations, args.seed)
    bound = min(est.upper_bound, d) if d else est.upper_bound
    print(f"n={code.n} k={code.k} d≤{bound} mask={100 * cls.mask_percent:.2f}%")
    print(f"code {label}  spec {code.spec}")
    print(f"embedding (i,j,g,h)={layout.indices}  grid {layout.height}x{layout.width}  long axis {cls.long_axis}")
    if plan is not None:
        print(f"routing steps short={plan.steps_short} long={plan.steps_long}")
    return 0


def cmd_layouts(args) -> int:
    label, code, *_ = resolve_code(_code_key(args))
    layouts = enumerate_toric_layouts(code)
    print(f"{label}: {len(layouts)} toric layouts")
    print("i j g h  grid    mask    valid")
    for lay in layouts:
        cls = classify_generators(embed(code, lay))
        ok = "ok" if all(toric_conditions(code, *lay.indices)) else "FAIL"
        print(" ".join(map(str, lay.indices)) + f"  {lay.height}x{lay.width:<4} {100 * cls.mask_percent:6.2f}%  {ok}")
    return 0


def cmd_route(args) -> int:
    label, code, d, layout, plan, placement = _placement(args)
    cls = classify_generators(placement)
    grid = GridGraph(placement.height, placement.width, args.layers)
    ops = operators_from_placement(placement, args.kind, args.which, cls)
    if args.schedule:
        result = load_manual_schedule(Path(args.schedule).read_text(), ops, grid, args.purified)
        print(f"schedule valid: {len(result.steps)} steps")
    else:
        result = greedy_route(ops, grid, args.purified)
        print(f"greedy: {len(result.steps)} steps")
    cert = lower_bound(ops, grid, args.purified, cls)
    print(f"lower bound: {cert.bound_steps} steps (edge {cert.edge_bound}, endpoint {cert.endpoint_bound}, "
          f"vertex {cert.vertex_bound}, cut {cert.cut_bound})")
    print(f"physical depth: {11 * len(result.steps)}")
    if args.out:
        Path(args.out).write_text(format_schedule(result))
    return 0


def cmd_savings(args) -> int:
    tm = math.inf if args.tm in ("inf", "infinity") else float(args.tm)
    print(f"{savings(args.s, args.l, tm):.2f}%")
    return 0


def cmd_purify_table(args) -> int:
    noise = NoiseModel(args.p)
    if args.no_idle:
        noise = noise.without_idle()
    table = build_purify_table(args.max_length, noise, args.shots, args.seed)
    text = table.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _config(args) -> ExperimentConfig:
    over = {
        "code": args.preset or args.code, "t_m": args.tm, "p": args.p, "shots": getattr(args, "shots", None),
        "seed": args.seed, "copies": getattr(args, "copies", None), "batch": getattr(args, "batch", None),
        "table_shots": args.table_shots, "schedule": getattr(args, "schedule", None),
        "output": getattr(args, "out", None),
    }
    if getattr(args, "t", None):
        over["t"] = args.t
    if args.no_idle:
        over["idle"] = "off"
    text = Path(args.config).read_text() if args.config else ""
    return ExperimentConfig.from_text(text, **over)


def cmd_build(args) -> int:
    cfg = _config(args)
    t = cfg.t[0]
    setup = None if cfg.is_surface else bb_setup(cfg)
    circ = build_circuit(cfg, t, cfg.seed, setup)
    text = circ.to_text()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"qubits={circ.n_qubits} rounds={circ.n_rounds} depth={circ.total_depth}", file=sys.stderr)
    return 0


def cmd_sample(args) -> int:
    circ = CircuitIR.from_text(Path(args.circuit).read_text())
    sectors = tuple(args.sectors)
    model = build_detector_model(circ, sectors)
    dets, obs = sample_shots(circ, model, args.shots, args.seed, sectors)
    Path(args.out).write_bytes(pack_shots(dets, obs))
    print(f"shots={args.shots} detectors={model.n_detectors} observables={model.n_observables}")
    if args.dem:
        Path(args.dem).write_text(model.export())
    return 0


def cmd_decode(args) -> int:
    circ = CircuitIR.from_text(Path(args.circuit).read_text())
    sectors = tuple(args.sectors)
    model = build_detector_model(circ, sectors)
    dets, obs = unpack_shots(Path(args.shots_file).read_bytes(), model.n_detectors, model.n_observables)
    pred, conv = BPOSDDecoder(model).decode_batch(dets)
    fails = int((pred != obs).any(axis=1).sum())
    print(f"shots={len(dets)} failures={fails} p_log={fails / max(len(dets), 1):.6g} "
          f"bp_converged={conv.mean() if len(conv) else 0:.4f}")
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    rows = run_config(cfg, progress=lambda r: print(
        f"t={r.t} failures={r.failures}/{r.shots} p_log={r.p_log:.4g}", file=sys.stderr))
    fits = fit_rows(rows)
    out = write_results(rows, fits, cfg.output, cfg)
    sys.stdout.write(rows_to_csv(rows))
    for f in fits:
        print(f.format())
    print(f"wrote {out}", file=sys.stderr)
    return 0


def _read_rows(paths):
    rows = []
    for p in paths:
        rows.extend(rows_from_csv(Path(p).read_text()))
    return rows


def cmd_fit(args) -> int:
    for f in fit_rows(_read_rows(args.results)):
        print(f.format())
    return 0


def cmd_plot(args) -> int:
    for f in emit_plots(_read_rows(args.results), args.out):
        print(f)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bilayer", description="BB codes on a bilayer grid: layouts, routing, "
                                 "purification and memory experiments.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("code-info", help="code parameters, distance bound and mask percent")
    _code_args(p)
    p.add_argument("--layout", help="override embedding as i,j,g,h")
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_code_info)

    p = sub.add_parser("layouts", help="list all toric layouts")
    _code_args(p)
    p.set_defaults(func=cmd_layouts)

    p = sub.add_parser("route", help="greedy routing or manual-schedule validation")
    _code_args(p)
    p.add_argument("--layout", help="override embedding as i,j,g,h")
    p.add_argument("--kind", choices=["X", "Z"], default="Z")
    p.add_argument("--which", choices=["short", "long", "all"], default="short")
    p.add_argument("--purified", action="store_true")
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--schedule", help="schedule file to validate instead of routing")
    p.add_argument("--out", help="write the schedule here")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("savings", help="depth saving of measuring long checks every t_m rounds")
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--tm", default="5")
    p.set_defaults(func=cmd_savings)

    p = sub.add_parser("purify-table", help="Bell-chain purification table as CSV")
    p.add_argument("--p", type=float, default=0.001)
    p.add_argument("--max-length", type=int, default=32)
    p.add_argument("--shots", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-idle", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_purify_table)

    def exp_args(p, multi_t: bool):
        _code_args(p)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--t", type=_int_list if multi_t else _single_t, help="rounds" + (" list" if multi_t else ""))
        p.add_argument("--tm", type=int)
        p.add_argument("--p", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--table-shots", type=int)
        p.add_argument("--no-idle", action="store_true")

    p = sub.add_parser("build", help="emit one circuit realization")
    exp_args(p, False)
    p.add_argument("--out")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("sample", help="sample detector and observable bits from a circuit file")
    p.add_argument("--circuit", required=True)
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sectors", default="Z", type=lambda s: list(s.replace(",", "")))
    p.add_argument("--out", required=True)
    p.add_argument("--dem", help="also write the detector error model")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("decode", help="decode sampled shots")
    p.add_argument("--circuit", required=True)
    p.add_argument("--shots-file", required=True)
    p.add_argument("--sectors", default="Z", type=lambda s: list(s.replace(",", "")))
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("run", help="full sweep: build, sample, decode, fit")
    exp_args(p, True)
    p.add_argument("--shots", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--copies", type=int)
    p.add_argument("--schedule")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fit", help="fit per-round rates from results CSVs")
    p.add_argument("results", nargs="+")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("plot", help="SVG charts from results CSVs")
    p.add_argument("results", nargs="+")
    p.add_argument("--out", default="plots")
    p.set_defaults(func=cmd_plot)
    return ap


def _int_list(s: str) -> str:
    if not all(x.strip().isdigit() for x in s.split(",")):
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")
    return s


def _single_t(s: str) -> str:
    if not s.strip().isdigit():
        raise argparse.ArgumentTypeError(f"expected one integer, got {s!r}")
    return s


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ScheduleError, RoutingError, InvalidLayoutError, PlotError, KeyError,
            ValueError, FileNotFoundError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
