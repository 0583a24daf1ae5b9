"""Roadway geometry and per-vehicle load waveforms.

An electrified roadway (ER) segment is a periodic array of transmitter
coils of length ``tx_len_m`` separated by gaps of ``gap_m``; a vehicle
receiver coil of length ``rx_len_m`` sliding over the array draws power
proportional to the instantaneous coil overlap, capped at the vehicle's
peak demand.  The resulting load, as a function of receiver position, is
a periodic clipped-trapezoid pulse train.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np


class ConstantRegimeError(ValueError):
    """Raised when a pulse-train quantity is requested for a demand so low
    that the load never varies (no ripple, no harmonics)."""


@dataclass(frozen=True)
class ErConfig:
    """Electrified-roadway segment parameters."""

    tx_len_m: float  # transmitter coil length
    gap_m: float  # inter-coil gap
    power_density_kw_per_m: float  # deliverable power per meter of overlap
    segment_len_m: float  # total energized segment length

    def __post_init__(self) -> None:
        if not self.tx_len_m > 0:
            raise ValueError(f"tx_len_m must be > 0, got {self.tx_len_m}")
        if not self.gap_m > 0:
            raise ValueError(f"gap_m must be > 0, got {self.gap_m}")
        if not self.power_density_kw_per_m > 0:
            raise ValueError(
                f"power_density_kw_per_m must be > 0, got {self.power_density_kw_per_m}"
            )
        if not self.segment_len_m >= self.tx_len_m + self.gap_m:
            raise ValueError(
                "segment_len_m must cover at least one coil period "
                f"({self.tx_len_m + self.gap_m} m), got {self.segment_len_m}"
            )

    @property
    def period_m(self) -> float:
        """Spatial period of the coil array (coil + gap)."""
        return self.tx_len_m + self.gap_m

    @property
    def n_coils(self) -> int:
        """Number of whole coil periods in the segment."""
        return int(np.floor(self.segment_len_m / self.period_m))

    @property
    def energized_len_m(self) -> float:
        """Length of the segment actually spanned by whole coil periods."""
        return self.n_coils * self.period_m


#: Test-track parameters used as defaults throughout (4.57 m period,
#: 109.36 kW/m): a 3.66 m coil, 0.91 m gap arrangement.
INDOT = ErConfig(
    tx_len_m=3.66,
    gap_m=0.91,
    power_density_kw_per_m=109.36,
    segment_len_m=4000.0,
)


@dataclass(frozen=True)
class EvParams:
    """A single vehicle on the roadway.

    ``rx_len_m`` may be shorter than the coil gap, in which case the
    receiver is periodically fully inside a gap and the load dips to
    exactly zero there.
    """

    rx_len_m: float
    peak_demand_kw: float
    speed_mps: float
    entry_time_s: float = 0.0
    class_id: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.rx_len_m > 0:
            raise ValueError(f"rx_len_m must be > 0, got {self.rx_len_m}")
        if not self.peak_demand_kw >= 0:
            raise ValueError(f"peak_demand_kw must be >= 0, got {self.peak_demand_kw}")
        if not self.speed_mps > 0:
            raise ValueError(f"speed_mps must be > 0, got {self.speed_mps}")

    def validate_against(self, cfg: ErConfig) -> None:
        """Check the cross-constraints that involve roadway geometry."""
        if not self.rx_len_m < cfg.tx_len_m:
            raise ValueError(
                f"rx_len_m must be < tx_len_m ({cfg.tx_len_m}), got {self.rx_len_m}"
            )
        max_kw = cfg.power_density_kw_per_m * self.rx_len_m
        if self.peak_demand_kw > max_kw * (1 + 1e-12):
            raise ValueError(
                f"peak_demand_kw {self.peak_demand_kw} exceeds deliverable "
                f"maximum {max_kw:.4f} for rx_len_m={self.rx_len_m}"
            )

    def period_s(self, cfg: ErConfig) -> float:
        """Fundamental period of the load seen by this vehicle."""
        return cfg.period_m / self.speed_mps

    def fundamental_hz(self, cfg: ErConfig) -> float:
        return self.speed_mps / cfg.period_m

    def omega0(self, cfg: ErConfig) -> float:
        """Fundamental angular frequency (rad/s)."""
        return 2.0 * np.pi * self.speed_mps / cfg.period_m

    def max_demand_kw(self, cfg: ErConfig) -> float:
        return cfg.power_density_kw_per_m * self.rx_len_m

    def dwell_s(self, cfg: ErConfig) -> float:
        """Time the vehicle spends on the energized segment."""
        return cfg.energized_len_m / self.speed_mps


@dataclass(frozen=True)
class Clipping:
    """Power-limit control: the converter caps delivery at peak demand."""


@dataclass(frozen=True)
class Scaling:
    """Proportional control: delivery is the max-overlap waveform times a
    constant factor in (0, 1]."""

    scale_factor: float

    def __post_init__(self) -> None:
        if not 0 < self.scale_factor <= 1:
            raise ValueError(
                f"scale_factor must be in (0, 1], got {self.scale_factor}"
            )


ControlScheme = Union[Clipping, Scaling]


def constant_regime(cfg: ErConfig, ev: EvParams) -> bool:
    """True when demand is low enough that the clipped load never varies.

    This happens iff peak demand does not exceed the power available at the
    minimum-overlap position, ``alpha * (rx_len - gap)``; for receivers not
    longer than the gap the minimum overlap is zero and any positive demand
    produces ripple.
    """
    alpha = cfg.power_density_kw_per_m
    if ev.peak_demand_kw == 0:
        return True
    return ev.peak_demand_kw <= alpha * (ev.rx_len_m - cfg.gap_m)


def _pulse_samples(cfg: ErConfig, ev: EvParams, xm: np.ndarray) -> np.ndarray:
    """Clipped-trapezoid pulse evaluated at positions within one period.

    ``xm`` must lie in [0, period).  Branch boundaries are half-open with
    ties going to the branch on the left.
    """
    alpha = cfg.power_density_kw_per_m
    ell, ell_t = ev.rx_len_m, cfg.tx_len_m
    p = ev.peak_demand_kw
    out = np.select(
        [xm < ell - cfg.gap_m, xm < p / alpha, xm < ell + ell_t - p / alpha],
        [alpha * (ell - cfg.gap_m), alpha * xm, p],
        default=alpha * (ell + ell_t - xm),
    )
    if ell < cfg.gap_m:
        # Receiver shorter than the gap: the trough dips to zero instead of
        # a positive baseline, and the trailing ramp must not go negative.
        np.maximum(out, 0.0, out=out)
    return out


def coil_pulse(cfg: ErConfig, ev: EvParams, x) -> np.ndarray | float:
    """One period of the clipped load waveform at in-period position ``x``.

    Raises ConstantRegimeError when the demand is in the constant-load
    regime, and ValueError for positions outside [0, period).
    """
    ev.validate_against(cfg)
    if constant_regime(cfg, ev):
        raise ConstantRegimeError(
            "demand is in the constant-load regime; the load equals "
            f"peak_demand_kw={ev.peak_demand_kw} everywhere on the segment"
        )
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa >= cfg.period_m):
        raise ValueError(f"position must be in [0, {cfg.period_m}), got {x}")
    out = _pulse_samples(cfg, ev, xa)
    return out if np.ndim(x) else float(out)


def load_at_position(cfg: ErConfig, ev: EvParams, scheme: ControlScheme, x) -> np.ndarray | float:
    """Load drawn when the receiver front edge is at roadway position ``x``.

    Zero outside the energized span [0, n_coils * period).  Positions are
    relative to the vehicle's segment entry point.
    """
    ev.validate_against(cfg)
    xa = np.asarray(x, dtype=float)
    on = (xa >= 0) & (xa < cfg.energized_len_m)
    xm = np.where(on, np.mod(xa, cfg.period_m), 0.0)
    if isinstance(scheme, Scaling):
        ref = EvParams(
            rx_len_m=ev.rx_len_m,
            peak_demand_kw=ev.max_demand_kw(cfg),
            speed_mps=ev.speed_mps,
            entry_time_s=ev.entry_time_s,
            class_id=ev.class_id,
        )
        vals = scheme.scale_factor * _pulse_samples(cfg, ref, xm)
    elif constant_regime(cfg, ev):
        vals = np.full_like(xm, ev.peak_demand_kw)
    else:
        vals = _pulse_samples(cfg, ev, xm)
    out = np.where(on, vals, 0.0)
    return out if np.ndim(x) else float(out)


def load_at_time(cfg: ErConfig, ev: EvParams, scheme: ControlScheme, t) -> np.ndarray | float:
    """Load drawn at time ``t``; zero before entry and after segment exit."""
    ta = np.asarray(t, dtype=float)
    x = ev.speed_mps * (ta - ev.entry_time_s)
    # Positions before entry map to x < 0 which load_at_position zeroes out.
    out = load_at_position(cfg, ev, scheme, x)
    return out if np.ndim(t) else float(out)
