"""Shared domain types for the simulator.

These are thin, explicit carriers. The environment keeps its working state
in flat numpy arrays for speed and materializes these types at its API
boundary (snapshots, schedules, rewards).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SILENT = -1  # schedule entry for a UAV that collects from nobody this sub-slot


@dataclass(frozen=True)
class SlotAction:
    """One UAV's decision for a whole slot.

    heading: radians in [0, 2*pi); speed: m/s in [0, v_max]; wet: 1 to run
    the energy beam this slot, else 0.
    """

    heading: float
    speed: float
    wet: int


@dataclass(frozen=True)
class WnState:
    """Snapshot of one ground node. Position is fixed for the whole episode."""

    pos: tuple[float, float]
    battery: float          # watt-seconds
    flag: int               # 1: transmitting data (I-node), 0: harvesting (E-node)
    hoe: int                # consecutive under-charged slot counter; 0 while flag = 1
    acc_data: float         # bits/Hz delivered so far
    last_harvest: float     # watt-seconds banked in the most recent slot


@dataclass(frozen=True)
class UavState:
    """Snapshot of one UAV, including its (possibly stale) view of the nodes."""

    pos: tuple[float, float]
    battery: float
    wet_flag: int
    velocity: float
    observed_batteries: np.ndarray   # length W
    observed_acc_data: np.ndarray    # length W


@dataclass(frozen=True)
class SubSlotSchedule:
    """One sub-slot's collection assignment: assignment[u] is a node index or SILENT."""

    assignment: np.ndarray

    def pairs(self) -> list[tuple[int, int]]:
        return [(u, int(w)) for u, w in enumerate(self.assignment) if w != SILENT]

    def check(self, flags: np.ndarray) -> None:
        """Raise if the one-to-one / I-node-only structure is broken."""
        taken = [int(w) for w in self.assignment if w != SILENT]
        if len(taken) != len(set(taken)):
            raise ValueError(f"node assigned to more than one UAV: {self.assignment}")
        for w in taken:
            if not (0 <= w < flags.shape[0]):
                raise ValueError(f"assignment index {w} out of range")
            if flags[w] != 1:
                raise ValueError(f"node {w} is scheduled but is not a transmitter")


@dataclass(frozen=True)
class RewardBreakdown:
    """Tier-1 reward terms for one UAV and one slot, raw and mixed."""

    b_wet: float
    b_wdc: float
    b_es: float
    b_sd: float
    r_total: float

    @classmethod
    def mix(cls, b_wet: float, b_wdc: float, b_es: float, b_sd: float,
            xi_wet: float, xi_wdc: float, xi_es: float, xi_sd: float) -> "RewardBreakdown":
        total = xi_wet * b_wet + xi_wdc * b_wdc + xi_es * b_es + xi_sd * b_sd
        return cls(b_wet, b_wdc, b_es, b_sd, total)
