"""Electrified-roadway load simulator and spectral analysis toolkit."""

from .roadway import (
    INDOT,
    Clipping,
    ConstantRegimeError,
    ControlScheme,
    ErConfig,
    EvParams,
    Scaling,
    coil_pulse,
    constant_regime,
    load_at_position,
    load_at_time,
)
from .spectrum import (
    FsCoefficients,
    SchemeComparison,
    compare_schemes,
    default_harmonic_count,
    fs_coefficients,
    fs_dc,
    fs_harmonic,
    fs_harmonic_grid,
    harmonic_bound,
    harmonic_count_for_dc,
    harmonic_ratio_clipping,
    harmonic_ratio_scaling,
    thc_single,
)
from .fleet import (
    EvClass,
    FleetModel,
    MaxDemand,
    PsdModel,
    UniformExplicit,
    UniformOnRange,
    analytic_psd,
    class_moments,
    composition_boundary,
    composition_condition,
    demand_bounds,
    mixture_moments,
    q_ratio,
    sample_demand,
    thc_total,
)
from .traffic import (
    IngestedFile,
    IngestError,
    Scenario,
    Synthetic,
    TrafficClass,
    TrafficSpec,
    covering_entry_time,
    covering_scenario,
    generate,
    ingest,
    max_covering_periods,
    scenario_from_json,
    scenario_to_json,
    write_scenario_csv,
)
from .composition import (
    SweepColumn,
    SweepConfig,
    SweepResult,
    default_sweep_config,
    run_sweep,
)
from .signals import (
    EnsemblePsd,
    LoadSeries,
    Peak,
    PsdEstimate,
    detect_peaks,
    empirical_thc,
    estimate_psd,
    harmonic_line_powers,
    monte_carlo_psd,
    period_coefficients,
    synthesize,
)

__version__ = "0.1.0"

__all__ = [
    "INDOT",
    "Clipping",
    "ConstantRegimeError",
    "ControlScheme",
    "EnsemblePsd",
    "ErConfig",
    "EvClass",
    "EvParams",
    "FleetModel",
    "FsCoefficients",
    "IngestError",
    "IngestedFile",
    "LoadSeries",
    "MaxDemand",
    "Peak",
    "PsdEstimate",
    "PsdModel",
    "Scaling",
    "Scenario",
    "SchemeComparison",
    "SweepColumn",
    "SweepConfig",
    "SweepResult",
    "Synthetic",
    "TrafficClass",
    "TrafficSpec",
    "UniformExplicit",
    "UniformOnRange",
    "analytic_psd",
    "class_moments",
    "coil_pulse",
    "compare_schemes",
    "composition_boundary",
    "composition_condition",
    "constant_regime",
    "covering_entry_time",
    "covering_scenario",
    "default_harmonic_count",
    "default_sweep_config",
    "demand_bounds",
    "detect_peaks",
    "empirical_thc",
    "estimate_psd",
    "fs_coefficients",
    "fs_dc",
    "fs_harmonic",
    "fs_harmonic_grid",
    "generate",
    "harmonic_bound",
    "harmonic_count_for_dc",
    "harmonic_line_powers",
    "harmonic_ratio_clipping",
    "harmonic_ratio_scaling",
    "ingest",
    "load_at_position",
    "load_at_time",
    "max_covering_periods",
    "mixture_moments",
    "monte_carlo_psd",
    "period_coefficients",
    "q_ratio",
    "run_sweep",
    "sample_demand",
    "scenario_from_json",
    "scenario_to_json",
    "synthesize",
    "thc_single",
    "thc_total",
    "write_scenario_csv",
]
