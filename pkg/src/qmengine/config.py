"""Run configuration shared by the trajectory engine, ensembles, and the CLI.

All quantities are dimensionless: energies in hbar*omega, times in 1/omega.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from .errors import UnsupportedConfigurationError
from .gaussian import MeasurementChannels

POLICIES = ("terminal", "per-step", "none")
SCHEMES = ("stratonovich", "ito")

DEFAULT_N_TRAJ = 10_000
#: Default step: min(tau1, tau2)/100, capped so dt stays small against the
#: oscillation period as well.
DT_DIVISOR = 100.0
#: Largest acceptable dt relative to min(tau1, tau2, 1).
MAX_DT_FRACTION = 0.1


@dataclass(frozen=True, slots=True)
class EngineConfig:
    """Physical and numerical parameters of one engine run."""

    nbar: float = 0.0
    tau1: float = 1.0
    tau2: float = 1.0
    dt: float | None = None
    t_final: float = 1.0
    n_traj: int = DEFAULT_N_TRAJ
    policy: str = "terminal"
    scheme: str = "stratonovich"
    r0: float = 1.0
    demon_kbtd: float = 0.0
    delta: float = 0.1
    seed: int = 0
    output_path: Path | None = None

    def channels(self) -> MeasurementChannels:
        return MeasurementChannels(self.tau1, self.tau2)

    @property
    def resolved_dt(self) -> float:
        if self.dt is not None:
            return self.dt
        return min(self.tau1, self.tau2, 1.0) / DT_DIVISOR

    @property
    def n_steps(self) -> int:
        steps = round(self.t_final / self.resolved_dt)
        return max(int(steps), 1)

    def step_index(self, t: float) -> int:
        """Index of the grid point at time t; t must sit on the step grid."""
        k = round(t / self.resolved_dt)
        if abs(k * self.resolved_dt - t) > 1e-9:
            raise ValueError(
                f"time {t} does not lie on the step grid with dt={self.resolved_dt}"
            )
        if not 0 <= k <= self.n_steps:
            raise ValueError(f"time {t} outside the horizon {self.t_final}")
        return int(k)

    def validate(self) -> "EngineConfig":
        """Check every domain constraint; returns self for chaining."""
        if self.nbar < 0.0:
            raise ValueError(f"nbar must be >= 0, got {self.nbar}")
        if not self.tau1 > 0.0 or not self.tau2 > 0.0:
            raise ValueError(
                f"measurement times must be positive, got ({self.tau1}, {self.tau2})"
            )
        if self.t_final <= 0.0:
            raise ValueError(f"t_final must be > 0, got {self.t_final}")
        dt = self.resolved_dt
        if dt <= 0.0:
            raise ValueError(f"dt must be > 0, got {dt}")
        if dt > MAX_DT_FRACTION * min(self.tau1, self.tau2, 1.0):
            raise ValueError(
                f"dt={dt} too large: must be <= {MAX_DT_FRACTION} * min(tau1, tau2, 1)"
            )
        if self.n_traj < 1:
            raise ValueError(f"n_traj must be >= 1, got {self.n_traj}")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.scheme == "ito" and self.tau1 != self.tau2:
            raise UnsupportedConfigurationError(
                "the Ito work ledger is defined only for symmetric channels "
                f"(tau1 == tau2); got ({self.tau1}, {self.tau2})"
            )
        if self.r0 <= 0.0:
            raise ValueError(f"r0 must be > 0, got {self.r0}")
        if self.demon_kbtd < 0.0:
            raise ValueError(f"demon_kbtd must be >= 0, got {self.demon_kbtd}")
        if self.delta <= 0.0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        return self

    def with_updates(self, **kwargs) -> "EngineConfig":
        return replace(self, **kwargs)
