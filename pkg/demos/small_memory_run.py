"""A minutes-scale memory sweep: [[72,8,6]] against a d=5 surface patch, with charts.

Shot counts are far below what a stable per-round rate needs; this shows the
pipeline end to end, not the reference numbers.
"""

import sys
from pathlib import Path

from bilayer.experiment import ExperimentConfig, fit_rows, run_config, write_results
from bilayer.plots import emit_plots


def main(out: str = "results/demo", shots: int = 2000) -> None:
    rows = []
    for code in ("bb72", "surface:5"):
        cfg = ExperimentConfig(code=code, t=(4, 8), shots=shots, batch=500, seed=7, table_shots=20_000)
        rows += run_config(cfg, progress=lambda r: print(f"{r.code} t={r.t} p_log={r.p_log:.4g}", file=sys.stderr))
    fits = fit_rows(rows)
    write_results(rows, fits, out)
    for f in fits:
        print(f.format())
    for path in emit_plots(rows, Path(out)):
        print(path)


if __name__ == "__main__":
    main()
