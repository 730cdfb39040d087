"""Config files and result tables.

Config format is flat ``key = value`` text: one assignment per line,
``#`` starts a comment, list values are comma-separated.  Unknown and
duplicate keys are hard errors; silent typos corrupt science.

Tables are UTF-8 CSV with LF line endings.  Reals are written with
shortest round-trip representation (17 significant digits when needed),
absent values as empty fields.  Writing is deterministic: identical
inputs give byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._version import __version__
from .analysis import ScalingFit, SlopeFit, SummaryRow
from .estimation import AdequacyCell, OnsetEstimate
from .sweep import (ConfigError, OverlapRecord, RedundancyTrajectory,
                    RunConfig, SweepResult, TimeGridSpec)

__all__ = [
    "OutputBundle",
    "parse_config",
    "parse_config_text",
    "serialize_config",
    "write_tables",
    "read_metadata",
    "read_onset_table",
    "METADATA_NAME",
]

METADATA_NAME = "run_metadata.txt"

PHI_HEADER = "t,m,delta,protocol,n,k,phi_hat,phi_iso,ci_low,ci_high"
ONSET_HEADER = ("t,delta,protocol,theta,m_star,m_star_lo,m_star_hi,"
                "R,R_eff,eta,FI,FI_eff")
OVERLAP_HEADER = "t,m,protocol,eta,pairs"
SLOPES_HEADER = ("delta,kappa,kappa_base2,intercept,r2,"
                 "window_t_start,window_t_end,n_points")
SCALING_HEADER = "delta,exponent,n_points"
SUMMARY_HEADER = "delta,max_R,final_FI,kappa,r2,t_star"

# key in the config file -> (RunConfig/TimeGridSpec attribute, parser kind)
_INT = "int"
_FLOAT = "float"
_FLOAT_LIST = "float_list"
_INT_LIST = "int_list"
_STR_LIST = "str_list"

_CONFIG_KEYS: Dict[str, Tuple[str, str]] = {
    "N": ("n_sites", _INT),
    "g": ("g", _FLOAT),
    "coupling_rate": ("coupling_rate", _FLOAT),
    "p0": ("p0", _FLOAT),
    "deltas": ("deltas", _FLOAT_LIST),
    "theta": ("theta", _FLOAT),
    "protocols": ("protocols", _STR_LIST),
    "n_fragments": ("n_fragments", _INT),
    "m_grid": ("m_grid", _INT_LIST),
    "alpha": ("alpha", _FLOAT),
    "bootstrap_B": ("bootstrap_replicates", _INT),
    "bootstrap_budget": ("bootstrap_budget", _INT),
    "overlap_pairs": ("overlap_pairs", _INT),
    "enumeration_cap": ("enumeration_cap", _INT),
    "master_seed": ("master_seed", _INT),
}
_GRID_KEYS: Dict[str, Tuple[str, str]] = {
    "t_min": ("t_min", _FLOAT),
    "t_knee": ("t_knee", _FLOAT),
    "t_max": ("t_max", _FLOAT),
    "n_dense": ("n_dense", _INT),
    "n_coarse": ("n_coarse", _INT),
}


def _parse_value(kind: str, text: str, key: str, lineno: int):
    try:
        if kind == _INT:
            return int(text)
        if kind == _FLOAT:
            return float(text)
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if kind == _FLOAT_LIST:
            return tuple(float(p) for p in parts)
        if kind == _INT_LIST:
            return tuple(int(p) for p in parts)
        return tuple(parts)
    except ValueError as exc:
        raise ConfigError(
            f"line {lineno}: bad value for {key!r}: {exc}") from None


def parse_config_text(text: str) -> RunConfig:
    """Parse config text; see parse_config."""
    main: Dict[str, object] = {}
    grid: Dict[str, object] = {}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        if key in _CONFIG_KEYS:
            attr, kind = _CONFIG_KEYS[key]
            main[attr] = _parse_value(kind, value, key, lineno)
        elif key in _GRID_KEYS:
            attr, kind = _GRID_KEYS[key]
            grid[attr] = _parse_value(kind, value, key, lineno)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    if grid:
        main["time_grid"] = TimeGridSpec(**grid)
    return RunConfig(**main)


def parse_config(path) -> RunConfig:
    """Read a flat key = value config file into a RunConfig.

    An empty file yields the full-default configuration.  Unknown keys,
    duplicate keys, and malformed values raise ConfigError with the
    offending line number.
    """
    text = Path(path).read_text(encoding="utf-8")
    return parse_config_text(text)


def _fmt(value) -> str:
    """Shortest round-trip formatting; absent values become empty fields."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def serialize_config(config: RunConfig) -> str:
    """Render a RunConfig as config text that parses back identically."""
    lines = [
        f"N = {config.n_sites}",
        f"g = {_fmt(config.g)}",
        f"coupling_rate = {_fmt(config.coupling_rate)}",
        f"p0 = {_fmt(config.p0)}",
        "deltas = " + ", ".join(_fmt(d) for d in config.deltas),
        f"theta = {_fmt(config.theta)}",
        "protocols = " + ", ".join(config.protocols),
        f"n_fragments = {config.n_fragments}",
        "m_grid = " + ", ".join(str(m) for m in config.m_grid),
        f"t_min = {_fmt(config.time_grid.t_min)}",
        f"t_knee = {_fmt(config.time_grid.t_knee)}",
        f"t_max = {_fmt(config.time_grid.t_max)}",
        f"n_dense = {config.time_grid.n_dense}",
        f"n_coarse = {config.time_grid.n_coarse}",
        f"alpha = {_fmt(config.alpha)}",
        f"bootstrap_B = {config.bootstrap_replicates}",
        f"bootstrap_budget = {config.bootstrap_budget}",
        f"overlap_pairs = {config.overlap_pairs}",
        f"enumeration_cap = {config.enumeration_cap}",
        f"master_seed = {config.master_seed}",
    ]
    return "\n".join(lines) + "\n"


@dataclass
class OutputBundle:
    """Tables destined for one output directory; absent tables are skipped.

    slope_fits and scalings pair each delta with a possibly-absent fit so
    the written rows cover every configured delta.
    """

    config: RunConfig
    cells: Optional[Sequence[AdequacyCell]] = None
    trajectories: Optional[Sequence[RedundancyTrajectory]] = None
    overlaps: Optional[Sequence[OverlapRecord]] = None
    slope_fits: Optional[Sequence[Tuple[float, Optional[SlopeFit]]]] = None
    scalings: Optional[Sequence[Tuple[float, Optional[ScalingFit]]]] = None
    summaries: Optional[Sequence[SummaryRow]] = None

    @classmethod
    def from_sweep(cls, result: SweepResult) -> "OutputBundle":
        return cls(config=result.config, cells=result.cells,
                   trajectories=result.trajectories,
                   overlaps=result.overlaps)


def _write_csv(path: Path, header: str, rows: List[List[object]]) -> None:
    lines = [header]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="")


def _onset_rows(trajectories: Sequence[RedundancyTrajectory],
                theta: float) -> List[List[object]]:
    entries = []
    for traj in trajectories:
        for p in traj.points:
            entries.append((p.t, p.delta, traj.protocol, p))
    entries.sort(key=lambda e: (e[0], e[1], e[2]))
    return [[t, delta, protocol, theta, p.m_star, p.m_star_lo, p.m_star_hi,
             p.r, p.r_eff, p.eta, p.fi, p.fi_eff]
            for t, delta, protocol, p in entries]


def write_tables(bundle: OutputBundle, out_dir) -> Dict[str, Path]:
    """Write every present table plus run metadata; returns name -> path.

    run_metadata.txt echoes the full configuration (plus the package
    version as a comment) and parses back to the identical RunConfig.
    Nothing that varies between reruns of one config (wall time, host,
    worker count) is written, so reruns are byte-identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: Dict[str, Path] = {}

    meta = out / METADATA_NAME
    meta.write_text(
        f"# run metadata, version {__version__}\n"
        "# parses back to the generating configuration\n"
        + serialize_config(bundle.config),
        encoding="utf-8", newline="")
    written["metadata"] = meta

    if bundle.cells is not None:
        rows = [[c.t, c.m, c.delta, c.protocol, c.n, c.k, c.p_hat,
                 c.phi_iso, c.ci_low, c.ci_high] for c in bundle.cells]
        path = out / "phi.csv"
        _write_csv(path, PHI_HEADER, rows)
        written["phi"] = path
    if bundle.trajectories is not None:
        path = out / "onset.csv"
        _write_csv(path, ONSET_HEADER,
                   _onset_rows(bundle.trajectories, bundle.config.theta))
        written["onset"] = path
    if bundle.overlaps is not None:
        rows = [[o.t, o.m, o.protocol, o.eta, o.pairs_used]
                for o in bundle.overlaps]
        path = out / "overlap.csv"
        _write_csv(path, OVERLAP_HEADER, rows)
        written["overlap"] = path
    if bundle.slope_fits is not None:
        rows = []
        for delta, fit in bundle.slope_fits:
            if fit is None:
                rows.append([delta, None, None, None, None, None, None,
                             None])
            else:
                rows.append([delta, fit.kappa, fit.kappa_base2,
                             fit.intercept, fit.r2, fit.t_start, fit.t_end,
                             fit.n_points])
        path = out / "slopes.csv"
        _write_csv(path, SLOPES_HEADER, rows)
        written["slopes"] = path
    if bundle.scalings is not None:
        rows = [[delta, fit.exponent if fit else None,
                 fit.n_points if fit else None]
                for delta, fit in bundle.scalings]
        path = out / "scaling.csv"
        _write_csv(path, SCALING_HEADER, rows)
        written["scaling"] = path
    if bundle.summaries is not None:
        rows = [[s.delta, s.max_r, s.final_fi, s.kappa, s.r2, s.t_star]
                for s in bundle.summaries]
        path = out / "summary.csv"
        _write_csv(path, SUMMARY_HEADER, rows)
        written["summary"] = path
    return written


def read_metadata(run_dir) -> RunConfig:
    """Recover the RunConfig echoed into a run directory."""
    path = Path(run_dir) / METADATA_NAME
    if not path.is_file():
        raise ConfigError(f"no {METADATA_NAME} in {run_dir}")
    return parse_config(path)


def _opt_float(text: str) -> Optional[float]:
    return float(text) if text else None


def _opt_int(text: str) -> Optional[int]:
    return int(text) if text else None


def read_onset_table(run_dir,
                     config: RunConfig) -> List[RedundancyTrajectory]:
    """Rebuild trajectories from onset.csv, in (protocol, delta) config order."""
    path = Path(run_dir) / "onset.csv"
    if not path.is_file():
        raise ConfigError(f"no onset.csv in {run_dir}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != ONSET_HEADER:
        raise ConfigError(f"onset.csv in {run_dir} has an unexpected header")
    grouped: Dict[Tuple[str, float], List[OnsetEstimate]] = {}
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(ONSET_HEADER.split(",")):
            raise ConfigError(f"malformed onset.csv row: {line!r}")
        (t, delta, protocol, theta, m_star, m_lo, m_hi, r, r_eff, eta, fi,
         fi_eff) = parts
        if float(theta) != config.theta:
            raise ConfigError(
                f"onset.csv theta {theta} disagrees with config "
                f"{config.theta}")
        est = OnsetEstimate(
            t=float(t), delta=float(delta), m_star=_opt_int(m_star),
            m_star_lo=_opt_int(m_lo), m_star_hi=_opt_int(m_hi),
            r=_opt_float(r), r_eff=_opt_float(r_eff), eta=_opt_float(eta),
            fi=_opt_float(fi), fi_eff=_opt_float(fi_eff))
        grouped.setdefault((protocol, float(delta)), []).append(est)
    trajectories: List[RedundancyTrajectory] = []
    for protocol in config.protocols:
        for delta in config.deltas:
            pts = grouped.get((protocol, delta))
            if pts is None:
                raise ConfigError(
                    f"onset.csv lacks rows for protocol {protocol!r}, "
                    f"delta {delta}")
            pts.sort(key=lambda p: p.t)
            trajectories.append(RedundancyTrajectory(
                delta=delta, protocol=protocol, points=tuple(pts)))
    return trajectories
