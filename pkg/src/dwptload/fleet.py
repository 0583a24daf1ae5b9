"""Stochastic fleet model of the aggregate roadway load.

A fleet is a mixture of vehicle classes (receiver length, probability,
demand distribution) sharing one speed.  With entry times independent and
uniform over the horizon, the aggregate load is wide-sense stationary and
its spectrum is a line spectrum at multiples of the common fundamental:
the DC line carries ``N^2 (E[c_0])^2`` and each harmonic line carries
``N E[c_m^2]``, which is what this module computes, along with the
aggregate total harmonic content and the truck/sedan composition analysis
built on the first harmonic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import integrate, optimize

from .roadway import ErConfig, EvParams
from .spectrum import fs_dc, fs_harmonic, harmonic_count_for_dc


@dataclass(frozen=True)
class MaxDemand:
    """Every vehicle of the class demands the full deliverable power."""


@dataclass(frozen=True)
class UniformOnRange:
    """Demand uniform over the whole ripple-producing range: from the
    constant-load threshold (or zero for short receivers) up to full power."""


@dataclass(frozen=True)
class UniformExplicit:
    """Demand uniform over an explicit [lo_kw, hi_kw] interval."""

    lo_kw: float
    hi_kw: float

    def __post_init__(self) -> None:
        if not 0 <= self.lo_kw <= self.hi_kw:
            raise ValueError(
                f"need 0 <= lo_kw <= hi_kw, got ({self.lo_kw}, {self.hi_kw})"
            )


DemandDist = Union[MaxDemand, UniformOnRange, UniformExplicit]


def demand_bounds(dist: DemandDist, cfg: ErConfig, rx_len_m: float) -> tuple[float, float]:
    """Support [lo, hi] of a demand distribution for the given receiver."""
    full = cfg.power_density_kw_per_m * rx_len_m
    if isinstance(dist, MaxDemand):
        return full, full
    if isinstance(dist, UniformOnRange):
        lo = max(0.0, cfg.power_density_kw_per_m * (rx_len_m - cfg.gap_m))
        return lo, full
    return dist.lo_kw, dist.hi_kw


def sample_demand(
    dist: DemandDist, rng: np.random.Generator, cfg: ErConfig, rx_len_m: float
) -> float:
    lo, hi = demand_bounds(dist, cfg, rx_len_m)
    if hi == lo:
        return hi
    return float(rng.uniform(lo, hi))


@dataclass(frozen=True)
class EvClass:
    rx_len_m: float
    prob: float
    demand_dist: DemandDist
    class_id: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.rx_len_m > 0:
            raise ValueError(f"rx_len_m must be > 0, got {self.rx_len_m}")
        if not 0 <= self.prob <= 1:
            raise ValueError(f"prob must be in [0, 1], got {self.prob}")


@dataclass(frozen=True)
class FleetModel:
    """Mixture of vehicle classes sharing one constant speed."""

    cfg: ErConfig
    classes: tuple[EvClass, ...]
    n_evs: int
    speed_mps: float

    def __post_init__(self) -> None:
        if len(self.classes) < 1:
            raise ValueError("need at least one class")
        total = sum(c.prob for c in self.classes)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"class probabilities must sum to 1, got {total}")
        if self.n_evs < 1:
            raise ValueError(f"n_evs must be >= 1, got {self.n_evs}")
        if not self.speed_mps > 0:
            raise ValueError(f"speed_mps must be > 0, got {self.speed_mps}")
        for c in self.classes:
            # Surfaces receiver/demand incompatibilities with the roadway
            # before any sampling happens.
            lo, hi = demand_bounds(c.demand_dist, self.cfg, c.rx_len_m)
            probe = EvParams(
                rx_len_m=c.rx_len_m,
                peak_demand_kw=hi,
                speed_mps=self.speed_mps,
            )
            probe.validate_against(self.cfg)

    @property
    def fundamental_hz(self) -> float:
        return self.speed_mps / self.cfg.period_m

    def member(self, class_index: int, demand_kw: float, entry_time_s: float = 0.0) -> EvParams:
        c = self.classes[class_index]
        return EvParams(
            rx_len_m=c.rx_len_m,
            peak_demand_kw=demand_kw,
            speed_mps=self.speed_mps,
            entry_time_s=entry_time_s,
            class_id=c.class_id,
        )


def _ev_at(cfg: ErConfig, rx_len_m: float, demand_kw: float) -> EvParams:
    return EvParams(rx_len_m=rx_len_m, peak_demand_kw=demand_kw, speed_mps=1.0)


def _uniform_moment(
    cfg: ErConfig,
    rx_len_m: float,
    lo: float,
    hi: float,
    m: int,
    *,
    squared: bool,
) -> float:
    """E[f(p)] for p ~ U(lo, hi), with f the (squared) m-th coefficient."""

    def f(p: float) -> float:
        c = fs_harmonic(cfg, _ev_at(cfg, rx_len_m, p), m)
        return c * c if squared else c

    if hi == lo:
        return f(hi)
    # The coefficient formulas switch branch at the constant-load threshold.
    threshold = cfg.power_density_kw_per_m * (rx_len_m - cfg.gap_m)
    pts = [threshold] if lo < threshold < hi else None
    val, _ = integrate.quad(
        f, lo, hi, points=pts, limit=300, epsabs=1e-10, epsrel=1e-11
    )
    return val / (hi - lo)


def class_moments(model: FleetModel, class_index: int, m: int) -> tuple[float, float]:
    """(E[c_0 | class], E[c_m^2 | class]) over the class demand distribution.

    Point-mass (full-demand) classes evaluate the coefficients directly;
    uniform-demand classes integrate them by adaptive quadrature.
    """
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    c = model.classes[class_index]
    cfg = model.cfg
    lo, hi = demand_bounds(c.demand_dist, cfg, c.rx_len_m)
    if hi == lo:
        ev = _ev_at(cfg, c.rx_len_m, hi)
        cm = fs_harmonic(cfg, ev, m)
        return fs_dc(cfg, ev), cm * cm
    e_c0 = _uniform_moment(cfg, c.rx_len_m, lo, hi, 0, squared=False)
    e_cm2 = _uniform_moment(cfg, c.rx_len_m, lo, hi, m, squared=True)
    return e_c0, e_cm2


def mixture_moments(model: FleetModel, m: int) -> tuple[float, float]:
    """(E[c_0], E[c_m^2]) over both class membership and demand."""
    e0 = 0.0
    e2 = 0.0
    for g, c in enumerate(model.classes):
        if c.prob == 0:
            continue
        m0, m2 = class_moments(model, g, m)
        e0 += c.prob * m0
        e2 += c.prob * m2
    return e0, e2


def max_demand_harmonic_power(cfg: ErConfig, rx_len_m: float, m: int) -> float:
    """Squared m-th coefficient at full demand, in product-of-sines form.

    Algebraically identical to ``fs_harmonic(...)^2`` at peak demand; kept
    as an independent formulation for cross-checking.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    alpha = cfg.power_density_kw_per_m
    d_per = cfg.period_m
    amp = (
        alpha
        * d_per
        / (m * np.pi) ** 2
        * np.sin(m * np.pi * rx_len_m / d_per)
        * np.sin(m * np.pi * cfg.tx_len_m / d_per)
    )
    return amp * amp


@dataclass(frozen=True)
class PsdModel:
    """Analytical line spectrum of the aggregate load.

    ``dc_power_sq`` is the power of the DC line, ``harmonic_powers[k]``
    the power of the line at ``(k+1) * fundamental_hz``; both in kW^2.
    """

    dc_power_sq: float
    harmonic_powers: tuple[float, ...]
    fundamental_hz: float
    n_evs: int

    @property
    def mean_kw(self) -> float:
        return float(np.sqrt(self.dc_power_sq))

    @property
    def truncation_m(self) -> int:
        return len(self.harmonic_powers)

    def autocorrelation(self, tau) -> np.ndarray | float:
        """Autocorrelation of the aggregate load at lag ``tau`` seconds."""
        ta = np.asarray(tau, dtype=float)
        w0 = 2.0 * np.pi * self.fundamental_hz
        powers = np.asarray(self.harmonic_powers)
        m = np.arange(1, powers.size + 1)
        out = self.dc_power_sq + 2.0 * np.sum(
            powers * np.cos(np.multiply.outer(ta, m) * w0), axis=-1
        )
        return out if np.ndim(tau) else float(out)


def analytic_psd(model: FleetModel, n_harmonics: int | None = None) -> PsdModel:
    """Line spectrum of the aggregate load under uniform random entry times.

    Assumes the N entry times are i.i.d. uniform over the horizon, which
    makes the aggregate wide-sense stationary: the DC line carries
    ``N^2 (E[c_0])^2`` and the line at each harmonic carries ``N E[c_m^2]``.
    """
    e0, _ = mixture_moments(model, 0)
    if n_harmonics is None:
        n_harmonics = harmonic_count_for_dc(model.cfg, e0)
    if n_harmonics < 1:
        raise ValueError(f"n_harmonics must be >= 1, got {n_harmonics}")
    powers = tuple(
        model.n_evs * mixture_moments(model, m)[1] for m in range(1, n_harmonics + 1)
    )
    return PsdModel(
        dc_power_sq=(model.n_evs * e0) ** 2,
        harmonic_powers=powers,
        fundamental_hz=model.fundamental_hz,
        n_evs=model.n_evs,
    )


def thc_total(model: FleetModel, n_harmonics: int | None = None) -> float:
    """Total harmonic content of the aggregate load, in percent.

    Equals ``100 sqrt(2 sum_m E[c_m^2] / (N (E[c_0])^2))``; for a fixed
    mixture it decays as ``1/sqrt(N)``.
    """
    e0, _ = mixture_moments(model, 0)
    if e0 <= 0:
        raise ValueError("aggregate mean load is zero; THC undefined")
    if n_harmonics is None:
        n_harmonics = harmonic_count_for_dc(model.cfg, e0)
    total = sum(mixture_moments(model, m)[1] for m in range(1, n_harmonics + 1))
    return 100.0 * float(np.sqrt(2.0 * total / (model.n_evs * e0 * e0)))


# --- Fleet-composition analysis (long vs short receivers) -----------------


def _check_pair(cfg: ErConfig, l_a: float, l_b: float) -> None:
    if not 0 < l_b <= l_a < cfg.period_m:
        raise ValueError(
            f"need 0 < l_b <= l_a < period ({cfg.period_m}), got "
            f"l_a={l_a}, l_b={l_b}"
        )


def composition_condition(cfg: ErConfig, l_a: float, l_b: float) -> bool:
    """Whether raising the share of long receivers lowers aggregate THC.

    True iff ``l_a sin^2(pi l_b / D) > l_b sin^2(pi l_a / D)`` — the
    first-harmonic criterion for mean-matched fleets.  Equivalently, the
    short-receiver class has the larger ratio (c_1)^2 / c_0.
    """
    _check_pair(cfg, l_a, l_b)
    d_per = cfg.period_m
    return bool(
        l_a * np.sin(np.pi * l_b / d_per) ** 2
        > l_b * np.sin(np.pi * l_a / d_per) ** 2
    )


def composition_boundary(cfg: ErConfig, l_a: float) -> Optional[float]:
    """Short-receiver length where the composition verdict flips, if any.

    Scans (0, l_a) for a sign change of the criterion margin and refines it
    by bisection to 1e-6 m.  Returns None when the verdict never flips
    (which is the case for l_a below the ratio-curve peak).
    """
    if not 0 < l_a < cfg.period_m:
        raise ValueError(f"need 0 < l_a < period, got {l_a}")
    d_per = cfg.period_m
    s_a = np.sin(np.pi * l_a / d_per) ** 2

    def margin(l_b: float) -> float:
        return l_a * np.sin(np.pi * l_b / d_per) ** 2 - l_b * s_a

    # The margin vanishes trivially at both endpoints; scan the interior.
    grid = np.linspace(1e-9 * l_a, l_a * (1 - 1e-9), 4097)
    vals = np.array([margin(x) for x in grid])
    sign_change = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
    if sign_change.size == 0:
        return None
    i = sign_change[0]
    return float(
        optimize.bisect(margin, grid[i], grid[i + 1], xtol=1e-9, maxiter=200)
    )


def q_ratio(
    cfg: ErConfig,
    l_a: float,
    l_b: float,
    *,
    theta1: float,
    theta2: float,
    n2: float,
    n1: Optional[float] = None,
) -> float:
    """First-harmonic power ratio between two fleet compositions.

    Scenario i mixes full-demand long (share ``theta_i``) and short
    receivers; the ratio compares their aggregate first-harmonic powers.
    When ``n1`` is omitted it is chosen so both scenarios draw the same
    mean power (counts are left fractional here; rounding to whole
    vehicles is a concern for scenario generation, not analysis).
    Q < 1 means scenario 1 has the lower aggregate THC under the
    first-harmonic approximation.
    """
    _check_pair(cfg, l_a, l_b)
    for theta in (theta1, theta2):
        if not 0 <= theta <= 1:
            raise ValueError(f"theta must be in [0, 1], got {theta}")
    if not n2 > 0:
        raise ValueError(f"n2 must be > 0, got {n2}")
    alpha = cfg.power_density_kw_per_m

    def dc_of(l: float) -> float:
        return fs_dc(cfg, _ev_at(cfg, l, alpha * l))

    def h1_of(l: float) -> float:
        c1 = fs_harmonic(cfg, _ev_at(cfg, l, alpha * l), 1)
        return c1 * c1

    c0_a, c0_b = dc_of(l_a), dc_of(l_b)
    h_a, h_b = h1_of(l_a), h1_of(l_b)
    if n1 is None:
        mean1 = theta1 * c0_a + (1 - theta1) * c0_b
        mean2 = theta2 * c0_a + (1 - theta2) * c0_b
        n1 = n2 * mean2 / mean1
    num = n1 * (theta1 * h_a + (1 - theta1) * h_b)
    den = n2 * (theta2 * h_a + (1 - theta2) * h_b)
    if den == 0 or num == 0:
        raise ValueError("a scenario has zero first-harmonic power")
    return float(num / den)
