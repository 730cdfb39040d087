"""Command-line front end.

Subcommands:
    simulate   run the counting pipeline and write phi/onset/overlap tables
    analyze    fit growth rates and scaling, write slopes/scaling/summary
    report     print the per-delta summary table to stdout
    plot-data  emit tidy per-figure CSVs from a finished run directory
    oracle     exact-enumeration cross-check for small environments

Exit codes: 0 success, 1 configuration or usage error, 2 runtime error,
3 oracle tolerance failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from ._version import __version__
from .analysis import (SlopeFit, fit_early_slope, scaling_exponent,
                       summary_table)
from .io import (METADATA_NAME, OutputBundle, parse_config, read_metadata,
                 read_onset_table, write_tables)
from .model import CouplingSet
from .sweep import (ConfigError, RunConfig, build_time_grid, cell_chi_values,
                    derive_cell_seed, oracle_report, run_sweep,
                    PURPOSE_COUPLINGS)

__all__ = ["main"]

FIGURES = ("R_vs_t", "holevo_cdf", "growth", "protocol", "fi")


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="qdfi",
                     description="Redundancy and functional information "
                                 "in dephasing spin environments")
    parser.add_argument("--version", action="version",
                        version=f"qdfi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run a sweep and write tables")
    sim.add_argument("--config", help="config file (defaults when omitted)")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--threads", default="1",
                     help="worker processes, an integer or 'auto'")
    sim.set_defaults(handler=_cmd_simulate)

    ana = sub.add_parser("analyze", help="fit slopes and summarize a run")
    ana.add_argument("--in", dest="indir", required=True,
                     help="directory written by simulate")
    ana.add_argument("--out", required=True, help="output directory")
    ana.set_defaults(handler=_cmd_analyze)

    rep = sub.add_parser("report", help="print the per-delta summary")
    rep.add_argument("--in", dest="indir", required=True)
    rep.set_defaults(handler=_cmd_report)

    plot = sub.add_parser("plot-data", help="emit tidy per-figure CSVs")
    plot.add_argument("--in", dest="indir", required=True)
    plot.add_argument("--figure", required=True, choices=FIGURES)
    plot.add_argument("--m", type=int, default=5,
                      help="fragment size for holevo_cdf (default 5)")
    plot.add_argument("--out", help="output directory (default: --in)")
    plot.set_defaults(handler=_cmd_plot_data)

    orc = sub.add_parser("oracle",
                         help="exact-enumeration cross-check (small N)")
    orc.add_argument("--config", required=True)
    orc.set_defaults(handler=_cmd_oracle)
    return parser


def _parse_threads(text: str) -> int:
    if text == "auto":
        return os.cpu_count() or 1
    try:
        threads = int(text)
    except ValueError:
        raise ConfigError(f"--threads must be an integer or 'auto', "
                          f"got {text!r}") from None
    if threads < 1:
        raise ConfigError("--threads must be >= 1")
    return threads


def _load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(p)


def _cmd_simulate(ns) -> int:
    config = _load_config(ns.config)
    threads = _parse_threads(ns.threads)
    started = time.perf_counter()
    result = run_sweep(config, threads=threads)
    written = write_tables(OutputBundle.from_sweep(result), ns.out)
    elapsed = time.perf_counter() - started
    # Timing goes to stdout only; output files must be rerun-identical.
    print(f"simulate: {len(result.cells)} cells, "
          f"{result.stats.holevo_evaluations} holevo evaluations, "
          f"{elapsed:.1f}s")
    for name in sorted(written):
        print(f"  {written[name]}")
    return 0


def _analysis_bundle(indir: str):
    config = read_metadata(indir)
    trajectories = read_onset_table(indir, config)
    primary = config.protocols[0]
    primary_trajs = [t for t in trajectories if t.protocol == primary]
    m_cap = max(config.m_grid)
    fits: Dict[float, Optional[SlopeFit]] = {}
    scalings: List = []
    for traj in primary_trajs:
        fits[traj.delta] = fit_early_slope(traj)
        scalings.append((traj.delta, scaling_exponent(traj, m_cap=m_cap)))
    rows = summary_table(primary_trajs, fits)
    return config, primary_trajs, fits, scalings, rows


def _cmd_analyze(ns) -> int:
    config, _, fits, scalings, rows = _analysis_bundle(ns.indir)
    bundle = OutputBundle(
        config=config,
        slope_fits=[(d, fits[d]) for d in config.deltas],
        scalings=scalings, summaries=rows)
    written = write_tables(bundle, ns.out)
    for name in sorted(written):
        print(f"  {written[name]}")
    return 0


def _cmd_report(ns) -> int:
    config, _, _, _, rows = _analysis_bundle(ns.indir)
    def cell(v, spec="{:.6g}"):
        return "-" if v is None else spec.format(v)
    print(f"protocol: {config.protocols[0]}   theta = {config.theta}   "
          f"N = {config.n_sites}")
    print(f"{'delta':>10} {'max_R':>12} {'final_FI':>10} {'kappa':>10} "
          f"{'r2':>8} {'t_star':>10}")
    for row in rows:
        print(f"{row.delta:>10.6g} {cell(row.max_r):>12} "
              f"{cell(row.final_fi):>10} {cell(row.kappa):>10} "
              f"{cell(row.r2):>8} {cell(row.t_star):>10}")
    return 0


def _fmt_field(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_rows(path: Path, header: str, rows) -> None:
    lines = [header]
    lines.extend(",".join(_fmt_field(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="")


def _cmd_plot_data(ns) -> int:
    config = read_metadata(ns.indir)
    out_dir = Path(ns.out) if ns.out else Path(ns.indir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"fig_{ns.figure}.csv"
    n = config.n_sites
    primary = config.protocols[0]

    if ns.figure == "holevo_cdf":
        if ns.m not in config.m_grid:
            raise ConfigError(f"--m {ns.m} is not on the configured m grid")
        m_index = config.m_grid.index(ns.m)
        lam_seed = derive_cell_seed(config.master_seed,
                                    purpose=PURPOSE_COUPLINGS)
        couplings = CouplingSet.exponential(
            config.n_sites, config.coupling_rate, config.g, lam_seed)
        grid = build_time_grid(config.time_grid)
        rows = []
        for t_index, t in enumerate(grid):
            chi = np.sort(cell_chi_values(config, couplings, grid, t_index,
                                          m_index, primary))
            cdf = np.arange(1, chi.size + 1) / chi.size
            rows.extend([float(t), ns.m, float(c), float(f)]
                        for c, f in zip(chi, cdf))
        _write_rows(path, "t,m,chi,cdf", rows)
        print(path)
        return 0

    trajectories = read_onset_table(ns.indir, config)
    primary_trajs = [t for t in trajectories if t.protocol == primary]

    if ns.figure == "R_vs_t":
        rows = []
        for traj in primary_trajs:
            for p in traj.points:
                r_lo = n / p.m_star_hi if p.m_star_hi else None
                r_hi = n / p.m_star_lo if p.m_star_lo else None
                rows.append([p.t, p.delta, p.r, p.r_eff, r_lo, r_hi])
        _write_rows(path, "t,delta,R,R_eff,R_lo,R_hi", rows)
    elif ns.figure == "fi":
        rows = []
        for traj in primary_trajs:
            for p in traj.points:
                fi_lo = math.log2(n / p.m_star_hi) if p.m_star_hi else None
                fi_hi = math.log2(n / p.m_star_lo) if p.m_star_lo else None
                rows.append([p.t, p.delta, p.fi, p.fi_eff, fi_lo, fi_hi])
        _write_rows(path, "t,delta,FI,FI_eff,FI_lo,FI_hi", rows)
    elif ns.figure == "growth":
        rows = []
        for traj in primary_trajs:
            fit = fit_early_slope(traj)
            for i, p in enumerate(traj.points):
                if p.r is None:
                    continue
                in_win = (fit is not None
                          and fit.window_start <= i <= fit.window_end)
                pred = (fit.kappa * p.t + fit.intercept) if in_win else None
                rows.append([p.delta, p.t, math.log(p.r), int(in_win), pred])
        _write_rows(path, "delta,t,ln_R,in_window,fit", rows)
    else:  # protocol comparison
        rows = []
        for traj in trajectories:
            for p in traj.points:
                rows.append([p.t, p.delta, traj.protocol, p.r, p.r_eff])
        _write_rows(path, "t,delta,protocol,R,R_eff", rows)
    print(path)
    return 0


def _cmd_oracle(ns) -> int:
    config = _load_config(ns.config)
    report = oracle_report(config)
    print(f"oracle: {len(report.cells)} cells, "
          f"max |phi_hat - phi_exact| = {report.max_abs_deviation:.6g}, "
          f"within-band fraction = {report.fraction_within:.4f}")
    if not report.passed:
        print("oracle: FAIL (exact value escaped the 99% Wilson band in "
              "too many cells)", file=sys.stderr)
        return 3
    print("oracle: PASS")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # usage error (1) or --help/--version (0)
        code = exc.code
        return code if isinstance(code, int) else 0
    try:
        return ns.handler(ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
