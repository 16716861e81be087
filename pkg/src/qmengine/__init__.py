"""Simulator and analysis toolkit for a quantum harmonic-oscillator engine
fueled by simultaneous weak measurements of position and momentum.

All quantities are dimensionless: energies in units of hbar*omega, times in
units of 1/omega, quadratures scaled by sqrt(m*omega/hbar).
"""

from .config import EngineConfig
from .ensembles import (
    EfficiencySeries,
    KsResult,
    MeanWorkSeries,
    PowerSeries,
    SigmaSchedule,
    WorkStatistics,
    efficiency_series,
    exact_work_cdf,
    exact_work_pdf,
    ks_compare,
    mean_work_curve,
    monte_carlo_power,
    power_series,
    run_ensemble,
    sigma_schedule,
)
from .errors import (
    DegenerateWorkDistributionError,
    UncertaintyViolationError,
    UnsupportedConfigurationError,
)
from .feedback import (
    FeedbackAmplitudes,
    PredictedMeans,
    TrajectoryRecord,
    WorkLedger,
    apply_reset,
    feedback_amplitudes,
    predicted_means,
    run_trajectory,
    step_with_feedback,
    work_increment_ito,
    work_increment_stratonovich,
)
from .gaussian import (
    GaussianState,
    MeasurementChannels,
    NoiseSource,
    ReadoutSample,
    covariance_series,
    covariance_step,
    mean_step,
    sample_readout,
    thermal_state,
)
from .single_shot import (
    CoherentOutcome,
    CycleResult,
    added_quantum_check,
    binary_average_work,
    binary_efficiency,
    extract_work_binary,
    extract_work_full,
    max_binary_efficiency,
    rectify,
    run_cycle,
    sample_outcome,
    sample_outcomes,
)
from .thermo import (
    ClassicalConfig,
    ErasureLedger,
    binary_erasure_cost,
    binary_p0,
    binary_thermo_efficiency,
    classical_cycle,
    continuous_memory_entropy,
    continuous_thermo_efficiency,
)

__version__ = "0.1.0"
