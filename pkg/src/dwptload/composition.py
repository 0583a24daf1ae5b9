"""Empirical truck/sedan composition sweeps.

Measures how the aggregate total harmonic content moves with the truck
share by building window-covering synthetic traffic for each
(penetration, sedan-receiver) cell, synthesizing the load, and reading
the THC off the sampled signal.  Rows are mean-power matched: the
vehicle count of each row is scaled so every penetration draws the same
expected load, which is the regime where the harmonic-composition
comparison is meaningful.

Variance control, so small trends survive a finite window budget:

* truck counts track the expected share deterministically (a
  largest-remainder accumulation across windows instead of independent
  labels), and adjacent penetrations add trucks incrementally, so the
  truck sets of one window are nested across penetration rows;
* all penetration rows of a window share one phase and demand pool,
  so adjacent rows differ only by the vehicles actually added or
  removed;
* phases and demands are drawn from a scrambled Sobol sequence across
  windows.  Window-to-window line-power noise is pairwise phase
  interference, which the low-discrepancy pairing averages out far
  faster than independent draws would.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .fleet import (
    DemandDist,
    EvClass,
    FleetModel,
    MaxDemand,
    UniformOnRange,
    class_moments,
    demand_bounds,
)
from .roadway import ErConfig, EvParams
from .signals import empirical_thc, synthesize
from .spectrum import fs_dc
from .traffic import (
    Scenario,
    Synthetic,
    TrafficClass,
    TrafficSpec,
    covering_entry_time,
    max_covering_periods,
)


@dataclass(frozen=True)
class SweepColumn:
    """One sedan population to sweep penetrations against."""

    rx_len_m: float
    demand_dist: DemandDist


@dataclass(frozen=True)
class SweepConfig:
    cfg: ErConfig
    columns: tuple[SweepColumn, ...]
    thetas: tuple[float, ...] = (0.0377, 0.0557, 0.1775)
    truck_rx_len_m: float = 1.83
    truck_speed_mps: float = 21.7
    sedan_speed_mps: float = 29.0
    n_ref: int = 45
    n_windows: int = 128
    window_s: float = 60.0
    window_start_s: float = 130.0
    sample_rate_hz: float = 500.0
    m_max: int = 8

    def __post_init__(self) -> None:
        if not self.columns:
            raise ValueError("need at least one sedan column")
        if not self.thetas or any(not 0.0 <= t <= 1.0 for t in self.thetas):
            raise ValueError(f"bad penetration list {self.thetas}")
        if self.n_windows < 1 or self.n_ref < 1:
            raise ValueError("n_windows and n_ref must be >= 1")


def default_sweep_config(cfg: ErConfig, n_windows: int = 128) -> SweepConfig:
    """The standard 3 x 3 sweep: short / mid / long sedan receivers."""
    return SweepConfig(
        cfg=cfg,
        columns=(
            SweepColumn(0.58, UniformOnRange()),
            SweepColumn(1.2, UniformOnRange()),
            SweepColumn(1.7, MaxDemand()),
        ),
        n_windows=n_windows,
    )


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Per-window THC of every sweep cell plus window-averaged summaries.

    Cells are summarized by the root-mean-square of the per-window THC
    values: that is the estimator whose expectation matches the
    ensemble (power-averaged) harmonic content, whereas the plain mean
    of per-window THC sits below it by a phase-interference bias.
    """

    thetas: tuple[float, ...]
    columns: tuple[SweepColumn, ...]
    ev_counts: np.ndarray  # (n_thetas, n_cols) mean-power-matched counts
    thc_windows: np.ndarray  # (n_thetas, n_cols, n_windows) percent

    @property
    def n_windows(self) -> int:
        return self.thc_windows.shape[2]

    @property
    def thc_rms(self) -> np.ndarray:
        """Power-sense window average of the per-cell THC, percent."""
        return np.sqrt(np.mean(self.thc_windows**2, axis=2))

    @property
    def thc_mean(self) -> np.ndarray:
        """Plain window average of the per-cell THC, percent."""
        return self.thc_windows.mean(axis=2)

    def column_spread(self, col: int) -> float:
        """Max minus min of the window-averaged THC down one column."""
        rms = self.thc_rms[:, col]
        return float(rms.max() - rms.min())

    def paired_diff(self, col: int, row_hi: int, row_lo: int) -> tuple[float, float]:
        """Window-averaged THC difference between two rows, with its SE.

        The difference is taken between the RMS averages; the standard
        error propagates the per-window paired difference of squared
        THC through the square root (delta method), which keeps the
        shared-slot noise cancellation of the common random numbers.
        """
        hi_sq = self.thc_windows[row_hi, col] ** 2
        lo_sq = self.thc_windows[row_lo, col] ** 2
        d_sq = hi_sq - lo_sq
        n = d_sq.size
        diff = float(np.sqrt(hi_sq.mean()) - np.sqrt(lo_sq.mean()))
        scale = 2.0 * np.sqrt(0.5 * (hi_sq.mean() + lo_sq.mean()))
        se = float(d_sq.std(ddof=1) / np.sqrt(n) / scale)
        return diff, se


def matched_counts(sw: SweepConfig, col: SweepColumn) -> list[int]:
    """Vehicle count per penetration drawing the same expected power.

    The first penetration keeps ``n_ref`` vehicles; the rest are scaled
    by the ratio of per-vehicle mean loads so every row of the column
    has the same expected aggregate demand.
    """
    cfg = sw.cfg
    alpha = cfg.power_density_kw_per_m
    truck_dc = fs_dc(
        cfg,
        EvParams(sw.truck_rx_len_m, alpha * sw.truck_rx_len_m, sw.truck_speed_mps),
    )
    probe = FleetModel(
        cfg=cfg,
        classes=(EvClass(col.rx_len_m, 1.0, col.demand_dist),),
        n_evs=1,
        speed_mps=sw.sedan_speed_mps,
    )
    sedan_dc = class_moments(probe, 0, 0)[0]

    def mean_power(theta: float) -> float:
        return theta * truck_dc + (1.0 - theta) * sedan_dc

    ref = mean_power(sw.thetas[0])
    return [max(1, round(sw.n_ref * ref / mean_power(t))) for t in sw.thetas]


def _accumulated_counts(target: float, n_windows: int) -> np.ndarray:
    """Integer counts per window averaging ``target`` (largest remainder)."""
    edges = np.floor(target * np.arange(n_windows + 1) + 0.5)
    return np.diff(edges).astype(int)


def truck_count_schedules(
    thetas: Sequence[float], counts: Sequence[int], n_windows: int
) -> np.ndarray:
    """Per-window truck counts for every penetration row of one column.

    Rows are built incrementally: each row adds a deterministic count
    on top of the previous one, so within any window the truck count
    never decreases with the share and the per-row window average is
    exactly ``theta * n_evs`` up to rounding drift below one vehicle.
    Requires ``theta * n_evs`` to be non-decreasing across rows.
    """
    targets = [t * n for t, n in zip(thetas, counts)]
    if any(b < a for a, b in zip(targets, targets[1:])):
        raise ValueError("expected truck counts must not decrease across rows")
    out = np.empty((len(targets), n_windows), dtype=int)
    out[0] = _accumulated_counts(targets[0], n_windows)
    for i in range(1, len(targets)):
        out[i] = out[i - 1] + _accumulated_counts(targets[i] - targets[i - 1], n_windows)
    return out


def run_sweep(sw: SweepConfig, seed: int) -> SweepResult:
    """Run the full windows x penetrations x columns measurement."""
    cfg = sw.cfg
    alpha = cfg.power_density_kw_per_m
    t0 = sw.window_start_s
    window = (t0, t0 + sw.window_s)
    f_truck = sw.truck_speed_mps / cfg.period_m
    f_sedan = sw.sedan_speed_mps / cfg.period_m
    k_truck = max_covering_periods(cfg, sw.truck_speed_mps, window)
    k_sedan = max_covering_periods(cfg, sw.sedan_speed_mps, window)
    truck_demand = alpha * sw.truck_rx_len_m

    n_thetas = len(sw.thetas)
    n_cols = len(sw.columns)
    counts = np.array([matched_counts(sw, c) for c in sw.columns]).T
    n_max = int(counts.max())
    schedules = np.empty((n_thetas, n_cols, sw.n_windows), dtype=int)
    for j in range(n_cols):
        schedules[:, j, :] = truck_count_schedules(
            sw.thetas, counts[:, j], sw.n_windows
        )
    bounds = [demand_bounds(c.demand_dist, cfg, c.rx_len_m) for c in sw.columns]

    rng = np.random.default_rng(seed)
    # One scrambled Sobol stream of (phase, demand) pairs per column; row w
    # seeds window w.  Drawn in a power-of-two block to keep the net balanced.
    pools = []
    for _ in range(n_cols):
        sob = qmc.Sobol(d=2 * n_max, scramble=True, seed=rng)
        pools.append(sob.random_base2(max(1, int(np.ceil(np.log2(sw.n_windows))))))
    thc = np.empty((n_thetas, n_cols, sw.n_windows))
    for w in range(sw.n_windows):
        for j, col in enumerate(sw.columns):
            lo, hi = bounds[j]
            u_phase = pools[j][w, :n_max]
            u_demand = pools[j][w, n_max:]
            u_k = rng.random(n_max)
            for i, theta in enumerate(sw.thetas):
                n = int(counts[i, j])
                n_trucks = int(schedules[i, j, w])
                evs = []
                for s in range(n_trucks):
                    k = int(u_k[s] * (k_truck + 1))
                    entry = covering_entry_time(
                        cfg, sw.truck_speed_mps, window, u_phase[s], k
                    )
                    evs.append(
                        EvParams(
                            sw.truck_rx_len_m,
                            truck_demand,
                            sw.truck_speed_mps,
                            entry,
                            "truck",
                        )
                    )
                for s in range(n_max - (n - n_trucks), n_max):
                    k = int(u_k[s] * (k_sedan + 1))
                    entry = covering_entry_time(
                        cfg, sw.sedan_speed_mps, window, u_phase[s], k
                    )
                    evs.append(
                        EvParams(
                            col.rx_len_m,
                            lo + (hi - lo) * u_demand[s],
                            sw.sedan_speed_mps,
                            entry,
                            "sedan",
                        )
                    )
                spec = TrafficSpec(
                    rate_evps=n / window[1],
                    duration_s=window[1],
                    classes=(
                        TrafficClass(
                            sw.truck_rx_len_m,
                            theta,
                            sw.truck_speed_mps,
                            MaxDemand(),
                            "truck",
                        ),
                        TrafficClass(
                            col.rx_len_m,
                            1.0 - theta,
                            sw.sedan_speed_mps,
                            col.demand_dist,
                            "sedan",
                        ),
                    ),
                )
                scenario = Scenario(
                    cfg=cfg,
                    evs=tuple(evs),
                    duration_s=window[1],
                    seed=seed,
                    provenance=Synthetic(spec),
                )
                series = synthesize(scenario, sw.sample_rate_hz, window=window)
                thc[i, j, w] = empirical_thc(series, [f_truck, f_sedan], sw.m_max)
    return SweepResult(
        thetas=sw.thetas,
        columns=sw.columns,
        ev_counts=counts,
        thc_windows=thc,
    )
