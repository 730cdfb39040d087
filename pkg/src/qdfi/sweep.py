"""Sweep orchestration: quenched couplings, adaptive time grid, cell loop.

One run draws couplings once, walks an adaptive time grid (geometric
before the knee where onsets move fast, linear after), and for every
(protocol, t, m) cell samples a fragment family, evaluates the Holevo
information of each fragment, and flags adequacy for every delta at once.
Per (t, delta) the adequate fractions are isotonically smoothed along m,
the onset is extracted, and confidence bounds from Wilson-band inversion
and (budget permitting) bootstrap are combined.

Determinism contract: every random decision derives its seed from the
master seed and the cell coordinates through an avalanche mixer, and
results are assembled in canonical order, so output is byte-identical
for any thread count.  Workers therefore communicate nothing but cell
coordinates and finished payloads.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .estimation import (AdequacyCell, IsotonicCurve, OnsetEstimate,
                         _bootstrap_counts, _wilson_bounds, adequacy_cell,
                         combine_onset_ci, isotonic_fit, onset_ci_inversion,
                         onset_from_curve, redundancy_fi)
from .model import CouplingSet, PointerEnsemble, Tolerance, holevo_biased
from .sampling import (DEFAULT_ENUMERATION_CAP, FragmentSample, OverlapStat,
                       enumerate_fragments, estimate_overlap_eta,
                       partition_disjoint, sample_random_fragments)

__all__ = [
    "ConfigError",
    "SweepCellError",
    "TimeGridSpec",
    "RunConfig",
    "RedundancyTrajectory",
    "OverlapRecord",
    "RunStats",
    "SweepResult",
    "OracleReport",
    "build_time_grid",
    "derive_cell_seed",
    "run_sweep",
    "cell_chi_values",
    "oracle_report",
]


class ConfigError(ValueError):
    """A run configuration value is missing, unknown, or out of range."""


class SweepCellError(RuntimeError):
    """One or more cells failed; the message lists their coordinates."""


_PROTOCOL_IDS = {"random": 0, "disjoint": 1, "exhaustive": 2}

# Purpose tags keep independent random streams from colliding even when
# the coordinate indices agree.
PURPOSE_COUPLINGS = 1
PURPOSE_FRAGMENTS = 2
PURPOSE_PAIRS = 3
PURPOSE_BOOTSTRAP = 4

_MASK64 = (1 << 64) - 1

# Fraction of enumeration-oracle cells whose exact value must fall inside
# the sampled 99% Wilson band for the check to pass.
ORACLE_MIN_FRACTION = 0.98


def _splitmix(z: int) -> int:
    """One splitmix64 step: full-avalanche mixing of a 64-bit word."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_cell_seed(master_seed: int, t_index: int = 0, m_index: int = 0,
                     delta_index: int = 0, protocol_id: int = 0,
                     purpose: int = 0) -> int:
    """Stable 64-bit seed for one cell and purpose.

    Chained splitmix64 over the coordinates: any single-field change
    avalanches the result, and the value depends only on the arguments,
    never on scheduling.
    """
    parts = (t_index, m_index, delta_index, protocol_id, purpose)
    if any(p < 0 for p in parts) or master_seed < 0:
        raise ConfigError("seed components must be nonnegative")
    h = _splitmix(master_seed & _MASK64)
    for part in parts:
        h = _splitmix(h ^ (part & _MASK64))
    return h


@dataclass(frozen=True)
class TimeGridSpec:
    """Adaptive grid: n_dense geometric points on [t_min, t_knee] followed
    by n_coarse linear points on (t_knee, t_max]."""

    t_min: float = 0.01
    t_knee: float = 1.0
    t_max: float = 6.0
    n_dense: int = 40
    n_coarse: int = 60

    def __post_init__(self) -> None:
        if not (0.0 < self.t_min < self.t_knee < self.t_max):
            raise ConfigError(
                f"need 0 < t_min < t_knee < t_max, got "
                f"({self.t_min}, {self.t_knee}, {self.t_max})")
        if self.n_dense < 2:
            raise ConfigError("n_dense must be >= 2")
        if self.n_coarse < 1:
            raise ConfigError("n_coarse must be >= 1")


def build_time_grid(spec: TimeGridSpec) -> np.ndarray:
    """Materialize the grid; strictly increasing, endpoints included."""
    dense = np.geomspace(spec.t_min, spec.t_knee, spec.n_dense)
    steps = np.arange(1, spec.n_coarse + 1, dtype=float) / spec.n_coarse
    coarse = spec.t_knee + (spec.t_max - spec.t_knee) * steps
    grid = np.concatenate([dense, coarse])
    if np.any(np.diff(grid) <= 0.0):
        raise ConfigError("time grid failed to be strictly increasing")
    return grid


@dataclass(frozen=True)
class RunConfig:
    """Complete scientific description of one sweep.

    Everything that affects output bytes lives here; execution details
    such as worker count are deliberately excluded so that reruns of one
    config are comparable file-for-file.
    """

    n_sites: int = 50
    g: float = 0.5
    coupling_rate: float = 1.0
    p0: float = 0.5
    deltas: Tuple[float, ...] = (0.01, 0.05, 0.1)
    theta: float = 0.9
    protocols: Tuple[str, ...] = ("random",)
    n_fragments: int = 600
    m_grid: Tuple[int, ...] = ()   # empty = 1..min(128, N)
    time_grid: TimeGridSpec = TimeGridSpec()
    alpha: float = 0.05
    bootstrap_replicates: int = 1000
    bootstrap_budget: int = 1_000_000
    overlap_pairs: int = 200
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP
    master_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        object.__setattr__(self, "protocols", tuple(self.protocols))
        if not self.m_grid:
            grid = tuple(range(1, min(128, self.n_sites) + 1))
        else:
            grid = tuple(int(m) for m in self.m_grid)
        object.__setattr__(self, "m_grid", grid)
        self._validate()

    def _validate(self) -> None:
        if self.n_sites < 2:
            raise ConfigError(f"N must be >= 2, got {self.n_sites}")
        if not (math.isfinite(self.g) and self.g > 0.0):
            raise ConfigError(f"g must be positive, got {self.g}")
        if not (math.isfinite(self.coupling_rate) and self.coupling_rate > 0.0):
            raise ConfigError(
                f"coupling_rate must be positive, got {self.coupling_rate}")
        if not (0.0 < self.p0 < 1.0):
            raise ConfigError(f"p0 must lie in (0, 1), got {self.p0}")
        if not self.deltas:
            raise ConfigError("deltas must be nonempty")
        for d in self.deltas:
            if not (1e-4 <= d < 1.0):
                raise ConfigError(
                    f"deltas must lie in [1e-4, 1); got {d} (delta = 0 is "
                    f"rejected, not clamped)")
        if len(set(self.deltas)) != len(self.deltas):
            raise ConfigError("deltas must be distinct")
        if not (0.0 < self.theta < 1.0):
            raise ConfigError(f"theta must lie in (0, 1), got {self.theta}")
        if not self.protocols:
            raise ConfigError("protocols must be nonempty")
        for p in self.protocols:
            if p not in _PROTOCOL_IDS:
                raise ConfigError(
                    f"unknown protocol {p!r}; choose from "
                    f"{sorted(_PROTOCOL_IDS)}")
        if len(set(self.protocols)) != len(self.protocols):
            raise ConfigError("protocols must be distinct")
        if self.n_fragments < 1:
            raise ConfigError("n_fragments must be >= 1")
        ms = self.m_grid
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ConfigError("m_grid must be strictly increasing")
        if ms[0] < 1 or ms[-1] > self.n_sites:
            raise ConfigError(
                f"m_grid must stay within [1, N = {self.n_sites}]")
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.bootstrap_replicates < 1:
            raise ConfigError("bootstrap_B must be >= 1")
        if self.bootstrap_budget < 0:
            raise ConfigError("bootstrap_budget must be >= 0")
        if self.overlap_pairs < 1:
            raise ConfigError("overlap_pairs must be >= 1")
        if self.enumeration_cap < 1:
            raise ConfigError("enumeration_cap must be >= 1")
        if not (0 <= self.master_seed <= _MASK64):
            raise ConfigError("master_seed must fit in 64 bits")

    @property
    def bootstrap_enabled(self) -> bool:
        """Bootstrap runs when per-replicate flag volume fits the budget."""
        return self.n_fragments * len(self.m_grid) <= self.bootstrap_budget


@dataclass(frozen=True)
class RedundancyTrajectory:
    """Ordered onset estimates over the time grid for one (delta, protocol)."""

    delta: float
    protocol: str
    points: Tuple[OnsetEstimate, ...]

    def __post_init__(self) -> None:
        ts = [p.t for p in self.points]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ConfigError("trajectory times must be strictly increasing")
        if any(p.delta != self.delta for p in self.points):
            raise ConfigError("trajectory points carry a foreign delta")


@dataclass(frozen=True)
class OverlapRecord:
    t: float
    m: int
    protocol: str
    eta: float
    pairs_used: int


@dataclass(frozen=True)
class RunStats:
    """Cross-checks exposed by the engine, not part of the science output."""

    holevo_evaluations: int
    fi_soft_violations: int
    bootstrap_ran: bool


@dataclass(frozen=True, eq=False)
class SweepResult:
    config: RunConfig
    couplings: CouplingSet
    time_grid: np.ndarray
    cells: Tuple[AdequacyCell, ...]
    trajectories: Tuple[RedundancyTrajectory, ...]
    overlaps: Tuple[OverlapRecord, ...]
    stats: RunStats


def _sample_cell(config: RunConfig, t_index: int, m_index: int,
                 protocol: str) -> FragmentSample:
    """Draw the fragment family for one cell from its derived seed."""
    m = config.m_grid[m_index]
    seed = derive_cell_seed(config.master_seed, t_index, m_index, 0,
                            _PROTOCOL_IDS[protocol], PURPOSE_FRAGMENTS)
    if protocol == "random":
        return sample_random_fragments(config.n_sites, m,
                                       config.n_fragments, seed)
    if protocol == "disjoint":
        return partition_disjoint(config.n_sites, m, seed)
    return enumerate_fragments(config.n_sites, m, config.enumeration_cap)


def cell_chi_values(config: RunConfig, couplings: CouplingSet,
                    time_grid: np.ndarray, t_index: int, m_index: int,
                    protocol: str) -> np.ndarray:
    """Per-fragment Holevo information chi for one cell.

    This is the exact computation the sweep performs, reproduced from the
    same derived seed, so post-hoc diagnostics can recover the fragment
    -level distribution without storing it.
    """
    sample = _sample_cell(config, t_index, m_index, protocol)
    t = float(time_grid[t_index])
    sums = couplings.couplings[sample.indices].sum(axis=1)
    log_c = -(config.g ** 2) * (t * t) * sums
    return holevo_biased(log_c, config.p0)


@dataclass
class _TimePayload:
    """Everything one (protocol, t) work unit produces."""

    protocol: str
    t_index: int
    cells: List[AdequacyCell]
    onsets: Dict[float, OnsetEstimate]
    overlaps: List[OverlapRecord]
    holevo_evaluations: int


def _compute_time_point(config: RunConfig, couplings: CouplingSet,
                        time_grid: np.ndarray, protocol: str,
                        t_index: int) -> _TimePayload:
    t = float(time_grid[t_index])
    ensemble = PointerEnsemble(config.p0)
    tols = [Tolerance.for_entropy(d, config.theta, ensemble.entropy)
            for d in config.deltas]
    proto_id = _PROTOCOL_IDS[protocol]

    cells_by_delta: Dict[float, List[AdequacyCell]] = {
        d: [] for d in config.deltas}
    counts_by_delta: Dict[float, List[int]] = {d: [] for d in config.deltas}
    sizes: List[int] = []
    overlap_by_m: Dict[int, Optional[OverlapStat]] = {}
    overlaps: List[OverlapRecord] = []
    evaluations = 0
    errors: List[str] = []

    for m_index, m in enumerate(config.m_grid):
        try:
            sample = _sample_cell(config, t_index, m_index, protocol)
        except Exception as exc:  # aggregated, reported with coordinates
            errors.append(f"(t={t}, m={m}, {protocol}): {exc}")
            continue
        sums = couplings.couplings[sample.indices].sum(axis=1)
        log_c = -(config.g ** 2) * (t * t) * sums
        chi = holevo_biased(log_c, config.p0)
        evaluations += int(chi.size)

        if sample.n_fragments >= 2:
            pair_seed = derive_cell_seed(config.master_seed, t_index,
                                         m_index, 0, proto_id, PURPOSE_PAIRS)
            stat = estimate_overlap_eta(sample, config.overlap_pairs,
                                        pair_seed)
            overlaps.append(OverlapRecord(t=t, m=m, protocol=protocol,
                                          eta=stat.eta,
                                          pairs_used=stat.pairs_used))
        else:
            stat = None
        overlap_by_m[m] = stat
        sizes.append(sample.n_fragments)

        for tol in tols:
            flags = chi >= tol.threshold
            cell = adequacy_cell(flags, t=t, m=m, delta=tol.delta,
                                 protocol=protocol, alpha=config.alpha)
            cells_by_delta[tol.delta].append(cell)
            counts_by_delta[tol.delta].append(cell.k)

    if errors:
        raise SweepCellError("cell failures: " + "; ".join(errors))

    out_cells: List[AdequacyCell] = []
    onsets: Dict[float, OnsetEstimate] = {}
    m_arr = np.asarray(config.m_grid, dtype=np.int64)
    n_arr = np.asarray(sizes, dtype=float)

    for d_index, delta in enumerate(config.deltas):
        cells = cells_by_delta[delta]
        phat = np.array([c.p_hat for c in cells])
        iso = isotonic_fit(phat, n_arr)
        cells = [replace(c, phi_iso=float(v)) for c, v in zip(cells, iso)]
        out_cells.extend(cells)

        curve = IsotonicCurve(m_arr, iso)
        m_star = onset_from_curve(curve, config.theta)
        inversion = onset_ci_inversion(cells, config.theta)
        if config.bootstrap_enabled:
            boot_seed = derive_cell_seed(config.master_seed, t_index, 0,
                                         d_index, proto_id,
                                         PURPOSE_BOOTSTRAP)
            boot = _bootstrap_counts(
                m_arr, np.asarray(counts_by_delta[delta], dtype=float),
                n_arr, config.theta, config.bootstrap_replicates, boot_seed)
            m_lo, m_hi = combine_onset_ci(inversion, boot)
        else:
            m_lo, m_hi = inversion

        if m_star is None:
            onsets[delta] = OnsetEstimate(
                t=t, delta=delta, m_star=None, m_star_lo=m_lo,
                m_star_hi=m_hi, r=None, r_eff=None, eta=None, fi=None,
                fi_eff=None)
        else:
            stat = overlap_by_m.get(m_star)
            eta = stat.eta if stat is not None else 0.0
            vals = redundancy_fi(config.n_sites, m_star, eta)
            onsets[delta] = OnsetEstimate(
                t=t, delta=delta, m_star=m_star, m_star_lo=m_lo,
                m_star_hi=m_hi, r=vals.r, r_eff=vals.r_eff, eta=eta,
                fi=vals.fi, fi_eff=vals.fi_eff)

    return _TimePayload(protocol=protocol, t_index=t_index, cells=out_cells,
                        onsets=onsets, overlaps=overlaps,
                        holevo_evaluations=evaluations)


# Worker-side state for process pools, installed once per worker.
_WORKER: Dict[str, object] = {}


def _worker_init(config: RunConfig, couplings: CouplingSet,
                 time_grid: np.ndarray) -> None:
    _WORKER["config"] = config
    _WORKER["couplings"] = couplings
    _WORKER["time_grid"] = time_grid


def _worker_run(task: Tuple[str, int]) -> _TimePayload:
    protocol, t_index = task
    return _compute_time_point(_WORKER["config"], _WORKER["couplings"],
                               _WORKER["time_grid"], protocol, t_index)


def _fi_soft_violations(trajectories: Sequence[RedundancyTrajectory],
                        n_sites: int) -> int:
    """Count FI decreases along t that exceed the adjacent CI widths.

    Sampling noise can make FI dip; a dip is only flagged when it is
    larger than the sum of the two points' FI interval widths, and the
    count is advisory (exposed in RunStats, never fatal).
    """
    def width(p: OnsetEstimate) -> Optional[float]:
        if p.m_star_lo is None or p.m_star_hi is None:
            return None
        return math.log2(p.m_star_hi / p.m_star_lo)

    violations = 0
    for traj in trajectories:
        present = [p for p in traj.points if p.fi is not None]
        for a, b in zip(present, present[1:]):
            wa, wb = width(a), width(b)
            if wa is None or wb is None:
                continue
            if b.fi < a.fi - (wa + wb):
                violations += 1
    return violations


def run_sweep(config: RunConfig, threads: int = 1) -> SweepResult:
    """Execute the full counting pipeline for one configuration.

    threads > 1 fans the (protocol, t) work units over a process pool;
    the result is identical for any thread count because all randomness
    is derived per cell and assembly order is canonical.
    """
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    lam_seed = derive_cell_seed(config.master_seed,
                                purpose=PURPOSE_COUPLINGS)
    couplings = CouplingSet.exponential(config.n_sites, config.coupling_rate,
                                        config.g, lam_seed)
    time_grid = build_time_grid(config.time_grid)
    tasks = [(protocol, t_index)
             for protocol in config.protocols
             for t_index in range(time_grid.size)]

    if threads == 1:
        payloads = [_compute_time_point(config, couplings, time_grid, p, i)
                    for p, i in tasks]
    else:
        with ProcessPoolExecutor(
                max_workers=threads, initializer=_worker_init,
                initargs=(config, couplings, time_grid)) as pool:
            payloads = list(pool.map(_worker_run, tasks))

    by_key = {(p.protocol, p.t_index): p for p in payloads}
    cells: List[AdequacyCell] = []
    overlaps: List[OverlapRecord] = []
    trajectories: List[RedundancyTrajectory] = []
    evaluations = 0
    for protocol in config.protocols:
        for t_index in range(time_grid.size):
            payload = by_key[(protocol, t_index)]
            cells.extend(payload.cells)
            overlaps.extend(payload.overlaps)
            evaluations += payload.holevo_evaluations
        for delta in config.deltas:
            points = tuple(by_key[(protocol, i)].onsets[delta]
                           for i in range(time_grid.size))
            trajectories.append(RedundancyTrajectory(
                delta=delta, protocol=protocol, points=points))

    cells.sort(key=lambda c: (c.t, c.m, c.delta, c.protocol))
    overlaps.sort(key=lambda o: (o.t, o.m, o.protocol))
    stats = RunStats(
        holevo_evaluations=evaluations,
        fi_soft_violations=_fi_soft_violations(trajectories, config.n_sites),
        bootstrap_ran=config.bootstrap_enabled)
    return SweepResult(config=config, couplings=couplings,
                       time_grid=time_grid, cells=tuple(cells),
                       trajectories=tuple(trajectories),
                       overlaps=tuple(overlaps), stats=stats)


@dataclass(frozen=True)
class OracleCell:
    t: float
    m: int
    delta: float
    phi_hat: float
    phi_exact: float
    ci_low: float
    ci_high: float
    within: bool


@dataclass(frozen=True)
class OracleReport:
    """Sampled-vs-exact adequacy comparison for an enumerable environment."""

    cells: Tuple[OracleCell, ...]
    max_abs_deviation: float
    fraction_within: float
    passed: bool


def oracle_report(config: RunConfig, band_alpha: float = 0.01) -> OracleReport:
    """Cross-check sampled adequacy fractions against exact enumeration.

    Requires C(N, m) within the enumeration cap for every m on the grid.
    Three representative times (quartile indices of the grid) are checked;
    a cell passes when the exact fraction falls inside the sampled
    (1 - band_alpha) Wilson band, and the report passes when at least
    ORACLE_MIN_FRACTION of cells do.
    """
    for m in config.m_grid:
        count = math.comb(config.n_sites, m)
        if count > config.enumeration_cap:
            raise ConfigError(
                f"oracle needs enumerable cells; C({config.n_sites}, {m}) "
                f"= {count} exceeds cap {config.enumeration_cap}")
    lam_seed = derive_cell_seed(config.master_seed,
                                purpose=PURPOSE_COUPLINGS)
    couplings = CouplingSet.exponential(config.n_sites, config.coupling_rate,
                                        config.g, lam_seed)
    time_grid = build_time_grid(config.time_grid)
    n_t = time_grid.size
    t_indices = sorted({n_t // 4, n_t // 2, (3 * n_t) // 4})
    ensemble = PointerEnsemble(config.p0)
    thresholds = [(d, Tolerance.for_entropy(d, config.theta,
                                            ensemble.entropy).threshold)
                  for d in config.deltas]

    out: List[OracleCell] = []
    for t_index in t_indices:
        t = float(time_grid[t_index])
        for m_index, m in enumerate(config.m_grid):
            chi = cell_chi_values(config, couplings, time_grid, t_index,
                                  m_index, "random")
            exact_sample = enumerate_fragments(config.n_sites, m,
                                               config.enumeration_cap)
            sums = couplings.couplings[exact_sample.indices].sum(axis=1)
            log_c = -(config.g ** 2) * (t * t) * sums
            chi_exact = holevo_biased(log_c, config.p0)
            for delta, threshold in thresholds:
                k = int(np.sum(chi >= threshold))
                n = int(chi.size)
                lo, hi = _wilson_bounds(np.array([k]), np.array([n]),
                                        band_alpha)
                exact = float(np.mean(chi_exact >= threshold))
                out.append(OracleCell(
                    t=t, m=m, delta=delta, phi_hat=k / n, phi_exact=exact,
                    ci_low=float(lo[0]), ci_high=float(hi[0]),
                    within=bool(lo[0] <= exact <= hi[0])))

    max_dev = max(abs(c.phi_hat - c.phi_exact) for c in out)
    frac = sum(c.within for c in out) / len(out)
    return OracleReport(cells=tuple(out), max_abs_deviation=max_dev,
                        fraction_within=frac,
                        passed=frac >= ORACLE_MIN_FRACTION)
