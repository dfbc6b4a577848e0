"""Air-to-ground channel: geometry, LoS-probability gain, SINR, data size.

The gain model mixes a line-of-sight and a non-line-of-sight power law by
an elevation-angle logistic:

    P_los(beta) = 1 / (1 + a * exp(-b * (beta - a)))       beta in degrees
    G(d)        = P_los * g0 * d^-alpha_los + (1 - P_los) * g0 * d^-alpha_nlos

Gains are average values, deterministic, and held constant across the
sub-slots of a slot; no small-scale fading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import WorldConfig
from .state import SILENT, SubSlotSchedule

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class LinkGeometry:
    distance: float             # 3-D separation, >= altitude
    horizontal_distance: float
    elevation_deg: float        # in (0, 90]


def link_geometry(uav_xy, wn_xy, altitude: float) -> LinkGeometry:
    dx = uav_xy[0] - wn_xy[0]
    dy = uav_xy[1] - wn_xy[1]
    d_rep = math.hypot(dx, dy)
    d = math.hypot(d_rep, altitude)
    beta = math.degrees(math.asin(altitude / d))
    return LinkGeometry(distance=d, horizontal_distance=d_rep, elevation_deg=beta)


def los_probability(beta_deg, a: float, b: float):
    """LoS probability for an elevation angle given in degrees."""
    return 1.0 / (1.0 + a * np.exp(-b * (np.asarray(beta_deg, dtype=float) - a)))


def channel_gain(geom: LinkGeometry, cfg: WorldConfig) -> float:
    p_los = float(los_probability(geom.elevation_deg, cfg.los_a, cfg.los_b))
    d = geom.distance
    return p_los * cfg.g0 * d ** -cfg.alpha_los + (1.0 - p_los) * cfg.g0 * d ** -cfg.alpha_nlos


def gain_matrix(uav_xy: np.ndarray, wn_xy: np.ndarray, cfg: WorldConfig) -> np.ndarray:
    """All pairwise gains, shape (U, W). Vectorized form of channel_gain."""
    diff = uav_xy[:, None, :] - wn_xy[None, :, :]
    d_rep2 = np.einsum("uwk,uwk->uw", diff, diff)
    d = np.sqrt(d_rep2 + cfg.altitude * cfg.altitude)
    beta = np.degrees(np.arcsin(cfg.altitude / d))
    p_los = los_probability(beta, cfg.los_a, cfg.los_b)
    return p_los * cfg.g0 * d ** -cfg.alpha_los + (1.0 - p_los) * cfg.g0 * d ** -cfg.alpha_nlos


def sinr_vector(schedule: SubSlotSchedule, gains: np.ndarray,
                p_wn_tx: float, noise_power: float) -> np.ndarray:
    """Per-UAV SINR for one sub-slot; zero where the UAV is silent.

    Every scheduled node transmits on the same band, so the interference at
    UAV u is the summed received power of all scheduled nodes except its own.
    """
    num_uavs = gains.shape[0]
    out = np.zeros(num_uavs)
    active = [(u, int(w)) for u, w in enumerate(schedule.assignment) if w != SILENT]
    if not active:
        return out
    nodes = [w for _, w in active]
    for u, w in active:
        rx = p_wn_tx * gains[u, nodes]          # received power of every active node at UAV u
        own = p_wn_tx * gains[u, w]
        out[u] = own / (rx.sum() - own + noise_power)
    return out


def subslot_data_size(gamma, subslot_len: float):
    """Bits/Hz moved across one link in one sub-slot: log2(1 + SINR) * subslot_len."""
    return np.log1p(gamma) / _LN2 * subslot_len
