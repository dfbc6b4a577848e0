"""Ground-node behavior: type hysteresis, hunger counter, status reporting.

A node's flag is 1 while it spends its battery transmitting data (an
"I-node") and 0 while it harvests ("E-node"). The flag flips through a
double threshold: up at b_i, down at b_e, retained in between. The hunger
counter (HoE) tracks how many recent slots left a harvesting node short of
the average charge it would need to climb from b_e to b_i over a horizon.

All functions are pure and accept scalars or aligned numpy arrays.
"""

from __future__ import annotations

import numpy as np

from .config import WorldConfig


def update_node_type(battery, prev_flag, b_e: float, b_i: float):
    """Double-threshold flag update: 1 at/above b_i, 0 at/below b_e, else kept."""
    battery = np.asarray(battery, dtype=float)
    out = np.where(battery >= b_i, 1, np.where(battery <= b_e, 0, prev_flag))
    if out.ndim == 0:
        return int(out)
    return out.astype(np.int64)


def expected_harvest(cfg: WorldConfig) -> float:
    """Per-slot charge a node must average to cross the type band in one horizon."""
    return (cfg.b_i - cfg.b_e) / cfg.horizon_slots


def update_hoe(hoe_prev, harvest_prev, flag, cfg: WorldConfig):
    """Hunger counter update given the new flag and the previous slot's harvest.

    Transmitters carry 0. A harvester that banked less than expected_harvest
    last slot gets hungrier by 1; one that met it cools off, but never below 1.
    """
    hoe_prev = np.asarray(hoe_prev)
    hungry = np.asarray(harvest_prev, dtype=float) < expected_harvest(cfg)
    e_side = np.where(hungry, hoe_prev + 1, np.maximum(hoe_prev - 1, 1))
    out = np.where(np.asarray(flag) == 1, 0, e_side)
    if out.ndim == 0:
        return int(out)
    return out.astype(np.int64)


def initial_flags(batteries, cfg: WorldConfig):
    """Flags at deployment: threshold rule applied with no transmit history."""
    return update_node_type(batteries, 0, cfg.b_e, cfg.b_i)


def initial_hoe(flags):
    flags = np.asarray(flags)
    out = np.where(flags == 1, 0, 1)
    if out.ndim == 0:
        return int(out)
    return out.astype(np.int64)


def observe_status(uav_xy, wn_xy, flags, true_batteries, true_acc,
                   obs_batteries, obs_acc, d_cov: float):
    """One UAV's refreshed view of the nodes. Returns new arrays, inputs untouched.

    Transmitter reports always arrive. Harvester reports arrive only from
    within the horizontal radius d_cov (boundary inclusive); outside it the
    UAV keeps whatever it last heard.
    """
    diff = np.asarray(wn_xy, dtype=float) - np.asarray(uav_xy, dtype=float)[None, :]
    d_rep = np.sqrt(np.einsum("wk,wk->w", diff, diff))
    heard = (np.asarray(flags) == 1) | (d_rep <= d_cov)
    new_b = np.where(heard, true_batteries, obs_batteries)
    new_c = np.where(heard, true_acc, obs_acc)
    return new_b, new_c
