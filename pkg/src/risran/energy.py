"""BS power-consumption model and cell-wide energy-efficiency snapshot."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import BaseStationSpec

ACTIVE = "active"
SLEEPING = "sleeping"


def bs_power(spec: BaseStationSpec, mode: str, p_out: float = 0.0) -> float:
    """Input power of one BS: fixed part plus the load-dependent slope when
    active, the constant sleep draw otherwise."""
    if mode == SLEEPING:
        return spec.p_sleep
    if mode != ACTIVE:
        raise ValueError(f"unknown mode: {mode!r}")
    if p_out < 0 or p_out > spec.p_max_tx * (1 + 1e-9):
        raise ValueError(f"p_out {p_out} outside [0, p_max_tx={spec.p_max_tx}]")
    return spec.p_fixed + spec.power_slope * p_out


@dataclass(frozen=True)
class EnergySnapshot:
    total_power: float         # W
    total_throughput: float    # bit/s
    ee: float                  # bit/J
    penalized_objective: float


def snapshot(power_draws, throughputs, overload_penalty: float,
             n_od: int) -> EnergySnapshot:
    """Aggregate cell-wide sums into the EE objective.

    penalized_objective = ee - overload_penalty * n_od, the quantity the
    network maximises (and the meta-controller's extrinsic reward).
    """
    total_power = float(np.sum(power_draws))
    total_throughput = float(np.sum(throughputs))
    if total_power <= 0:
        raise ValueError("total power must be > 0 (the MBS is always active)")
    ee = total_throughput / total_power
    return EnergySnapshot(
        total_power=total_power,
        total_throughput=total_throughput,
        ee=ee,
        penalized_objective=ee - overload_penalty * n_od,
    )
