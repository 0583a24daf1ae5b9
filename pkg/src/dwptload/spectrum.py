"""Fourier-series description of the single-vehicle load waveform.

The clipped-trapezoid pulse train admits closed-form Fourier coefficients:
with plateau width derived from the demand clip level, the waveform is a
periodized trapezoid, i.e. the convolution of two rectangles, so every
coefficient is a product of two sinc factors.  The waveform is even about
the pulse center, so with that phase convention all coefficients are real.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .roadway import ConstantRegimeError, ErConfig, EvParams, constant_regime


def _sinc(x: np.ndarray | float) -> np.ndarray | float:
    """sin(pi x)/(pi x) with the removable singularity filled in."""
    return np.sinc(x)


def fs_dc(cfg: ErConfig, ev: EvParams) -> float:
    """Mean load over one spatial period (kW)."""
    ev.validate_against(cfg)
    if constant_regime(cfg, ev):
        return ev.peak_demand_kw
    alpha = cfg.power_density_kw_per_m
    d_per = cfg.period_m
    p = ev.peak_demand_kw
    return p / d_per * (cfg.tx_len_m + ev.rx_len_m - p / alpha)


def fs_harmonic(cfg: ErConfig, ev: EvParams, m) -> np.ndarray | float:
    """Real Fourier coefficient c_m of the load pulse train (kW).

    Phase convention: position measured from the pulse center, where the
    waveform is even; coefficients are then real (possibly negative) and
    the waveform is ``c_0 + 2 * sum_m c_m cos(m w0 t)``.  m may be an
    integer or an array of integers; c_0 equals :func:`fs_dc`.
    """
    ev.validate_against(cfg)
    ma = np.asarray(m, dtype=float)
    if constant_regime(cfg, ev):
        out = np.where(ma == 0, ev.peak_demand_kw, 0.0)
        return out if np.ndim(m) else float(out)
    alpha = cfg.power_density_kw_per_m
    d_per = cfg.period_m
    p = ev.peak_demand_kw
    # Widths of the two rectangles whose convolution is the trapezoid:
    # the ramp span and the pulse's full-width-at-half-plateau.
    a = p / alpha
    b = cfg.tx_len_m + ev.rx_len_m - p / alpha
    c0 = p / d_per * b
    out = c0 * _sinc(ma * a / d_per) * _sinc(ma * b / d_per)
    return out if np.ndim(m) else float(out)


def fs_harmonic_grid(
    cfg: ErConfig, rx_len_m: float, demands_kw: np.ndarray, m: np.ndarray
) -> np.ndarray:
    """Real coefficients c_m for one receiver at many demand levels.

    Vectorized over both axes; returns shape ``demands_kw.shape + m.shape``.
    Demands at or below the constant-load threshold yield c_0 = demand and
    zero harmonics.
    """
    alpha = cfg.power_density_kw_per_m
    d_per = cfg.period_m
    p = np.asarray(demands_kw, dtype=float)[..., np.newaxis]
    ma = np.asarray(m, dtype=float)
    a = p / alpha
    b = cfg.tx_len_m + rx_len_m - a
    out = (p * b / d_per) * _sinc(ma * a / d_per) * _sinc(ma * b / d_per)
    flat = p[..., 0] <= alpha * (rx_len_m - cfg.gap_m)
    if np.any(flat):
        out[flat] = np.where(ma == 0, p[flat], 0.0)
    return out


def harmonic_bound(cfg: ErConfig, m) -> np.ndarray | float:
    """Demand-independent envelope ``alpha * D / (m pi)^2`` on |c_m|."""
    ma = np.asarray(m)
    if np.any(ma < 1):
        raise ValueError(f"m must be >= 1, got {m}")
    alpha = cfg.power_density_kw_per_m
    out = alpha * cfg.period_m / (ma * np.pi) ** 2
    return out if np.ndim(m) else float(out)


def harmonic_count_for_dc(cfg: ErConfig, dc_kw: float, tol_pp: float = 0.01) -> int:
    """Smallest M whose envelope-bounded spectral tail can add less than
    ``tol_pp`` percentage points to a THC with DC term ``dc_kw``.

    Uses ``sum_{m>M} m^-4 <= 1/(3 M^3)`` with the demand-independent
    envelope on |c_m|, so the returned M is conservative.
    """
    if dc_kw <= 0:
        return 1
    envelope = cfg.power_density_kw_per_m * cfg.period_m / np.pi**2
    # 100 * sqrt(2 * envelope^2 / (3 M^3)) / dc < tol_pp
    target = tol_pp / 100.0 * dc_kw / envelope
    m = int(np.ceil((2.0 / (3.0 * target * target)) ** (1.0 / 3.0)))
    return max(m, 1)


def default_harmonic_count(cfg: ErConfig, ev: EvParams, tol_pp: float = 0.01) -> int:
    """Default truncation order for one vehicle's THC (see
    :func:`harmonic_count_for_dc`)."""
    return harmonic_count_for_dc(cfg, fs_dc(cfg, ev), tol_pp)


def thc_single(
    cfg: ErConfig, ev: EvParams, n_harmonics: int | None = None
) -> float:
    """Total harmonic content of one vehicle's load, in percent.

    Defined as the RMS of the oscillatory part relative to the mean:
    ``100 * sqrt(2 * sum_m c_m^2) / c_0``.  In the constant-load regime the
    waveform has no ripple and the THC is exactly zero.
    """
    ev.validate_against(cfg)
    if constant_regime(cfg, ev):
        return 0.0
    if n_harmonics is None:
        n_harmonics = default_harmonic_count(cfg, ev)
    if n_harmonics < 1:
        raise ValueError(f"n_harmonics must be >= 1, got {n_harmonics}")
    c0 = fs_dc(cfg, ev)
    cm = fs_harmonic(cfg, ev, np.arange(1, n_harmonics + 1))
    return 100.0 * float(np.sqrt(2.0 * np.sum(cm * cm)) / c0)


@dataclass(frozen=True)
class FsCoefficients:
    """Truncated Fourier-series description of one vehicle's load."""

    c0_kw: float
    harmonics_kw: tuple[float, ...]  # c_m for m = 1..truncation_m
    fundamental_hz: float

    @property
    def truncation_m(self) -> int:
        return len(self.harmonics_kw)


def fs_coefficients(
    cfg: ErConfig, ev: EvParams, n_harmonics: int | None = None
) -> FsCoefficients:
    """Bundle c_0 and c_1..c_M for one vehicle (M defaults to the tail rule)."""
    ev.validate_against(cfg)
    if n_harmonics is None:
        n_harmonics = default_harmonic_count(cfg, ev)
    if n_harmonics < 1:
        raise ValueError(f"n_harmonics must be >= 1, got {n_harmonics}")
    cm = fs_harmonic(cfg, ev, np.arange(1, n_harmonics + 1))
    return FsCoefficients(
        c0_kw=fs_dc(cfg, ev),
        harmonics_kw=tuple(float(c) for c in np.atleast_1d(cm)),
        fundamental_hz=ev.fundamental_hz(cfg),
    )


@dataclass(frozen=True)
class SchemeComparison:
    """First-harmonic ripple ratios of the two converter control schemes."""

    clipping_ratio: float
    scaling_ratio: float
    lemma_applies: bool  # sufficient condition tx_len > period/2 held

    @property
    def clipping_wins(self) -> bool:
        return self.clipping_ratio <= self.scaling_ratio


def harmonic_ratio_clipping(cfg: ErConfig, ev: EvParams, m: int = 1) -> float:
    """|c_m| / c_0 under demand-clipping control (0 in the constant regime)."""
    if constant_regime(cfg, ev):
        return 0.0
    return abs(fs_harmonic(cfg, ev, m)) / fs_dc(cfg, ev)


def harmonic_ratio_scaling(cfg: ErConfig, ev: EvParams, m: int = 1) -> float:
    """|c_m| / c_0 when the converter scales the max-demand waveform down
    to meet the same mean; the ratio is demand-independent."""
    ref = EvParams(
        rx_len_m=ev.rx_len_m,
        peak_demand_kw=ev.max_demand_kw(cfg),
        speed_mps=ev.speed_mps,
    )
    return abs(fs_harmonic(cfg, ref, m)) / fs_dc(cfg, ref)


def compare_schemes(cfg: ErConfig, ev: EvParams, m: int = 1) -> SchemeComparison:
    """Compare first-harmonic ripple of clipping vs scaling control.

    When the coil is longer than half the period (duty cycle above one
    half), clipping never does worse; outside that condition the comparison
    is still computed but the guarantee does not apply.
    """
    ev.validate_against(cfg)
    return SchemeComparison(
        clipping_ratio=harmonic_ratio_clipping(cfg, ev, m),
        scaling_ratio=harmonic_ratio_scaling(cfg, ev, m),
        lemma_applies=cfg.tx_len_m > cfg.period_m / 2,
    )
