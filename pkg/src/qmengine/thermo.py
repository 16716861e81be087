"""Classical Brownian baseline and demon-memory erasure accounting.

The classical limit of the engine is a Brownian particle in a harmonic trap:
an error-free position measurement plus an ideal trap shift converts all
available information into work, W = k*x**2/2, averaging kB*T/2 per cycle.
The quantum engine beats this bound at T = 0 thanks to the quantum of noise
added by the dual-quadrature measurement.

Erasing the demon's memory costs at least kB*T_D times the Shannon entropy
of the record (Landauer); for the binary protocol the record is one bit, for
continuous readouts the entropy follows the Gaussian readout density plus a
detector-resolution term -log(delta**2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .single_shot import binary_average_work


@dataclass(frozen=True, slots=True)
class ClassicalConfig:
    """Brownian-engine parameters: spring constant, bath energy, sample count."""

    spring_k: float
    kbt: float
    n_samples: int

    def __post_init__(self) -> None:
        if self.spring_k <= 0.0:
            raise ValueError(f"spring constant must be > 0, got {self.spring_k}")
        if self.kbt < 0.0:
            raise ValueError(f"kB*T must be >= 0, got {self.kbt}")
        if self.n_samples < 1:
            raise ValueError(f"need at least one sample, got {self.n_samples}")


@dataclass(frozen=True, slots=True)
class ErasureLedger:
    """Demon memory bookkeeping for one operating point."""

    demon_kbtd: float
    p0: float
    resolution_delta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p0 <= 1.0:
            raise ValueError(f"p0 must lie in [0, 1], got {self.p0}")
        if self.resolution_delta <= 0.0:
            raise ValueError(f"delta must be > 0, got {self.resolution_delta}")


def classical_cycle(config: ClassicalConfig, rng: np.random.Generator) -> np.ndarray:
    """Sample work from the ideal classical cycle: x ~ N(0, kbt/k), W = k*x**2/2."""
    x = rng.normal(0.0, math.sqrt(config.kbt / config.spring_k), size=config.n_samples)
    return 0.5 * config.spring_k * x * x


def binary_p0(nbar: float, r0: float) -> float:
    """Probability that the measured amplitude triggers the binary shift.

    P(r >= r0/2) = exp(-r0**2 / (4*(nbar + 1))) for the thermal-state
    outcome law.
    """
    if nbar < 0.0:
        raise ValueError(f"mean thermal occupation must be >= 0, got {nbar}")
    if r0 < 0.0:
        raise ValueError(f"threshold parameter must be >= 0, got {r0}")
    return math.exp(-r0 * r0 / (4.0 * (nbar + 1.0)))


def shannon_entropy_bit(p0: float) -> float:
    """Binary Shannon entropy in nats, with H(0) = H(1) = 0 by continuity."""
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p0}")
    if p0 == 0.0 or p0 == 1.0:
        return 0.0
    return -p0 * math.log(p0) - (1.0 - p0) * math.log(1.0 - p0)


def binary_erasure_cost(p0: float, demon_kbtd: float) -> float:
    """Minimum energy to erase the one-bit record: kB*T_D * H(p0)."""
    if demon_kbtd < 0.0:
        raise ValueError(f"demon kB*T_D must be >= 0, got {demon_kbtd}")
    return demon_kbtd * shannon_entropy_bit(p0)


def binary_thermo_efficiency(nbar: float, r0: float, demon_kbtd: float) -> float:
    """Thermodynamic efficiency of the binary cycle including erasure.

    (<W'> - kB*T_D*H(p0)) / (1 + nbar); reported as-is, so it can turn
    negative when erasure dominates.
    """
    work = binary_average_work(nbar, r0)
    cost = binary_erasure_cost(binary_p0(nbar, r0), demon_kbtd)
    return (work - cost) / (1.0 + nbar)


def continuous_memory_entropy(
    readout_variances: tuple[float, float], resolution_delta: float
) -> float:
    """Shannon entropy (nats) of the discretized two-channel readout record.

    The readouts are independent Gaussians, so the differential entropy is
    the sum of 0.5*log(2*pi*e*var) per channel; binning into squares of side
    delta adds -log(delta**2).
    """
    v1, v2 = readout_variances
    if v1 <= 0.0 or v2 <= 0.0:
        raise ValueError(f"readout variances must be > 0, got ({v1}, {v2})")
    if resolution_delta <= 0.0:
        raise ValueError(f"delta must be > 0, got {resolution_delta}")
    differential = 0.5 * math.log(2.0 * math.pi * math.e * v1) + 0.5 * math.log(
        2.0 * math.pi * math.e * v2
    )
    return differential - 2.0 * math.log(resolution_delta)


def continuous_thermo_efficiency(
    mean_work: float,
    heat_input: float,
    memory_entropy: float,
    demon_kbtd: float,
) -> float:
    """Compose the continuous-cycle efficiency from caller-supplied pieces.

    (mean_work - kB*T_D * memory_entropy) / heat_input; which work average
    and observation time enter is the caller's choice.
    """
    if heat_input <= 0.0:
        raise ValueError(f"heat input must be > 0, got {heat_input}")
    return (mean_work - demon_kbtd * memory_entropy) / heat_input
