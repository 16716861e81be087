"""Ensemble Monte Carlo driver, analytic work-statistics oracles, and
statistical comparison machinery.

The work harvested by the engine is exponentially distributed at every time:
P(W, t) = (tau/sigma(t)) * exp(-tau*W/sigma(t)) in units of hbar*omega, with
sigma(t) the accumulated squared symplectic eigenvalue nu(t) = q3(t)/2 of the
covariance flow (integral of nu**2 for a single terminal feedback, nu**2*dt
for extraction after every step).  The mean work is sigma(t)/tau and the
steady-state power is nu_ss**2/tau = 1/(4*tau).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.stats import kstest

from .config import EngineConfig
from .errors import DegenerateWorkDistributionError, UnsupportedConfigurationError
from .feedback import EnsembleRecord, run_ensemble_arrays
from .gaussian import MeasurementChannels, covariance_series, thermal_state


@dataclass(frozen=True, slots=True)
class WorkStatistics:
    """Binned work samples of one ensemble with their first two moments."""

    samples: np.ndarray
    counts: np.ndarray
    bin_edges: np.ndarray
    mean: float
    variance: float
    stderr: float
    n_traj: int
    t: float
    policy: str


@dataclass(frozen=True, slots=True)
class SigmaSchedule:
    """Time series of nu(t) and of the work-scale parameter sigma(t).

    For the terminal policy sigma(t) is the running integral of nu**2; for
    the per-step policy it is nu(t)**2 * dt.
    """

    t: np.ndarray
    nu: np.ndarray
    sigma: np.ndarray
    tau: float
    dt: float
    policy: str

    def _index(self, t: float) -> int:
        k = round(t / self.dt)
        if abs(k * self.dt - t) > 1e-9 or not 0 <= k < len(self.t):
            raise ValueError(f"time {t} not on the schedule grid (dt={self.dt})")
        return int(k)

    def sigma_at(self, t: float) -> float:
        return float(self.sigma[self._index(t)])

    def nu_at(self, t: float) -> float:
        return float(self.nu[self._index(t)])

    def mean_work_at(self, t: float) -> float:
        return self.sigma_at(t) / self.tau


@dataclass(frozen=True, slots=True)
class MeanWorkSeries:
    t: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray


@dataclass(frozen=True, slots=True)
class PowerSeries:
    t: np.ndarray
    power: np.ndarray


@dataclass(frozen=True, slots=True)
class EfficiencySeries:
    """Ensemble work-conversion efficiency eta(t) = <W>/<Q> under per-step
    extraction, with Q = W + (q3 + q5)/4 - 1/2 (harvested work plus the
    energy still stored in the covariances)."""

    t: np.ndarray
    eta: np.ndarray
    stderr: np.ndarray
    tau_ratio: float


@dataclass(frozen=True, slots=True)
class KsResult:
    statistic: float
    pvalue: float
    passed: bool
    level: float


def sigma_schedule(
    nbar: float,
    channels: MeasurementChannels,
    dt: float,
    t_final: float,
    policy: str = "terminal",
) -> SigmaSchedule:
    """Integrate the covariance flow and accumulate the work scale sigma(t).

    Defined only for symmetric channels, where the covariance matrix stays in
    normal form and nu(t) = q3(t)/2 = q5(t)/2.
    """
    if not channels.symmetric:
        raise UnsupportedConfigurationError(
            "sigma schedule requires symmetric channels (nu is defined only "
            f"in normal form); got ({channels.tau1}, {channels.tau2})"
        )
    if policy not in ("terminal", "per-step"):
        raise ValueError(f"policy must be 'terminal' or 'per-step', got {policy!r}")
    n_steps = max(int(round(t_final / dt)), 1)
    cov = covariance_series(thermal_state(nbar), channels, dt, n_steps)
    nu = 0.5 * cov[:, 0]
    t = np.arange(n_steps + 1) * dt
    if policy == "terminal":
        sigma = cumulative_trapezoid(nu * nu, dx=dt, initial=0.0)
    else:
        sigma = nu * nu * dt
    return SigmaSchedule(
        t=t, nu=nu, sigma=sigma, tau=channels.tau1, dt=dt, policy=policy
    )


def exact_work_pdf(w, t: float, schedule: SigmaSchedule):
    """Exact density of the harvested work at time t (units hbar*omega).

    Exponential with mean sigma(t)/tau; zero for w < 0.  A vanishing sigma
    means all mass sits at W = 0 and is reported as a distinct error.
    """
    sigma = schedule.sigma_at(t)
    if sigma <= 0.0:
        raise DegenerateWorkDistributionError(
            f"sigma({t}) = {sigma}: all probability mass at W = 0"
        )
    rate = schedule.tau / sigma
    w = np.asarray(w, dtype=float)
    out = np.where(w >= 0.0, rate * np.exp(-rate * np.clip(w, 0.0, None)), 0.0)
    return out if out.ndim else float(out)


def exact_work_cdf(w, t: float, schedule: SigmaSchedule):
    """Exact distribution function of the harvested work at time t.

    Handles the degenerate sigma = 0 case as a unit step at W = 0.
    """
    sigma = schedule.sigma_at(t)
    w = np.asarray(w, dtype=float)
    if sigma <= 0.0:
        out = np.where(w >= 0.0, 1.0, 0.0)
    else:
        rate = schedule.tau / sigma
        out = np.where(w >= 0.0, 1.0 - np.exp(-rate * np.clip(w, 0.0, None)), 0.0)
    return out if out.ndim else float(out)


def _moments(samples: np.ndarray) -> tuple[float, float, float]:
    n = len(samples)
    mean = math.fsum(samples) / n
    variance = float(np.var(samples, ddof=1)) if n > 1 else 0.0
    stderr = math.sqrt(variance / n) if n > 1 else 0.0
    return mean, variance, stderr


def work_samples(record: EnsembleRecord, policy: str, row: int = -1) -> np.ndarray:
    """Work sample per trajectory at one checkpoint row, per policy.

    terminal -> the harvest of a reset at that time (displacement energy);
    per-step -> the single-step harvest ending at that time;
    none     -> the accrued ledger value (diagnostics).
    """
    if policy == "terminal":
        return record.displacement_energy[row]
    if policy == "per-step":
        return record.step_work[row]
    return record.ledger_cum[row]


def run_ensemble(config: EngineConfig, bins="fd") -> WorkStatistics:
    """Run config.n_traj independent trajectories and bin the work at t_final."""
    record = run_ensemble_arrays(config, [config.t_final])
    samples = work_samples(record, config.policy)
    counts, bin_edges = np.histogram(samples, bins=bins)
    mean, variance, stderr = _moments(samples)
    return WorkStatistics(
        samples=samples,
        counts=counts,
        bin_edges=bin_edges,
        mean=mean,
        variance=variance,
        stderr=stderr,
        n_traj=config.n_traj,
        t=config.t_final,
        policy=config.policy,
    )


def mean_work_curve(config: EngineConfig, t_grid: Sequence[float]) -> MeanWorkSeries:
    """Ensemble mean of the terminal-feedback work at each grid time."""
    if config.policy != "terminal":
        raise UnsupportedConfigurationError(
            f"mean work curve is defined for the terminal policy, got {config.policy!r}"
        )
    horizon = max(t_grid)
    record = run_ensemble_arrays(config.with_updates(t_final=horizon), t_grid)
    means = np.empty(len(t_grid))
    errs = np.empty(len(t_grid))
    for i in range(len(t_grid)):
        means[i], _, errs[i] = _moments(record.displacement_energy[i])
    return MeanWorkSeries(t=np.asarray(t_grid, dtype=float), mean=means, stderr=errs)


def power_series(config: EngineConfig, t_grid: Sequence[float]) -> PowerSeries:
    """Analytic engine power J(t) = nu(t)**2 / tau on the grid."""
    schedule = sigma_schedule(
        config.nbar, config.channels(), config.resolved_dt, max(t_grid)
    )
    power = np.array(
        [schedule.nu_at(t) ** 2 / schedule.tau for t in t_grid], dtype=float
    )
    return PowerSeries(t=np.asarray(t_grid, dtype=float), power=power)


def monte_carlo_power(
    config: EngineConfig, t_grid: Sequence[float]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Finite-difference power estimate from paired trajectory increments.

    Returns (window midpoints, estimates, standard errors); the pairing over
    common trajectories cancels most of the Monte Carlo variance.
    """
    if config.policy != "terminal":
        raise UnsupportedConfigurationError(
            f"power estimate is defined for the terminal policy, got {config.policy!r}"
        )
    horizon = max(t_grid)
    record = run_ensemble_arrays(config.with_updates(t_final=horizon), t_grid)
    w = record.displacement_energy
    mids = np.empty(len(t_grid) - 1)
    est = np.empty(len(t_grid) - 1)
    err = np.empty(len(t_grid) - 1)
    for i in range(len(t_grid) - 1):
        span = t_grid[i + 1] - t_grid[i]
        diff = (w[i + 1] - w[i]) / span
        mids[i] = 0.5 * (t_grid[i] + t_grid[i + 1])
        est[i], _, err[i] = _moments(diff)
    return mids, est, err


def efficiency_series(
    config: EngineConfig, t_grid: Sequence[float], n_batches: int = 100
) -> EfficiencySeries:
    """Ensemble efficiency eta(t) = <W>/<Q> under per-step extraction.

    Q adds to the harvested work the energy still stored in the covariances,
    (q3 + q5)/4 - 1/2 (the general form, valid also for asymmetric
    channels).  Standard errors come from batch means over trajectory
    sub-ensembles.
    """
    if config.policy != "per-step":
        raise UnsupportedConfigurationError(
            f"efficiency series is defined for the per-step policy, got {config.policy!r}"
        )
    horizon = max(t_grid)
    record = run_ensemble_arrays(config.with_updates(t_final=horizon), t_grid)
    excess = 0.25 * (record.cov[:, 0] + record.cov[:, 2]) - 0.5
    n_batches = max(2, min(n_batches, config.n_traj // 2))

    eta = np.empty(len(t_grid))
    err = np.empty(len(t_grid))
    for i in range(len(t_grid)):
        w = record.extracted_cum[i]
        mean_w = math.fsum(w) / len(w)
        eta[i] = mean_w / (mean_w + excess[i])
        batch_eta = [
            (bm := float(np.mean(b))) / (bm + excess[i])
            for b in np.array_split(w, n_batches)
        ]
        err[i] = float(np.std(batch_eta, ddof=1)) / math.sqrt(n_batches)
    return EfficiencySeries(
        t=np.asarray(t_grid, dtype=float),
        eta=eta,
        stderr=err,
        tau_ratio=config.tau2 / config.tau1,
    )


def ks_compare(
    samples: np.ndarray,
    cdf: Callable[[np.ndarray], np.ndarray],
    level: float = 0.01,
) -> KsResult:
    """Two-sided Kolmogorov-Smirnov test of samples against an analytic CDF.

    Passes when the p-value is at or above the significance level, i.e. the
    statistic is below the corresponding critical value.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("cannot run a KS comparison on an empty sample")
    if samples.size < 100:
        raise ValueError(f"need at least 100 samples, got {samples.size}")
    result = kstest(samples, cdf)
    return KsResult(
        statistic=float(result.statistic),
        pvalue=float(result.pvalue),
        passed=bool(result.pvalue >= level),
        level=level,
    )
