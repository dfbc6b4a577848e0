"""Energy laws: nonlinear RF harvesting, UAV propulsion, battery updates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import WorldConfig


@dataclass(frozen=True)
class HarvesterModel:
    """Piecewise RF-to-DC transform.

    Zero below the sensitivity power, flat above the saturation power, and a
    logistic in between, normalized so the curve is exactly 0 at p_sen and
    exactly f_max at p_sat (continuous at both joints):

        f(p) = f_max * (s(p) - s(p_sen)) / (s(p_sat) - s(p_sen)),
        s(p) = 1 / (1 + exp(-c1 * (p - c0)))

    Any object with the same dc_power signature can stand in for this one;
    the environment only calls dc_power.
    """

    p_sen: float
    p_sat: float
    f_max: float
    c0: float
    c1: float

    def _sigma(self, p):
        return 1.0 / (1.0 + np.exp(-self.c1 * (np.asarray(p, dtype=float) - self.c0)))

    def dc_power(self, p_rf):
        p = np.asarray(p_rf, dtype=float)
        lo = self._sigma(self.p_sen)
        hi = self._sigma(self.p_sat)
        mid = self.f_max * (self._sigma(np.clip(p, self.p_sen, self.p_sat)) - lo) / (hi - lo)
        out = np.where(p < self.p_sen, 0.0, mid)
        if out.ndim == 0:
            return float(out)
        return out

    @classmethod
    def from_config(cls, cfg: WorldConfig) -> "HarvesterModel":
        return cls(p_sen=cfg.p_sen, p_sat=cfg.p_sat, f_max=cfg.harvest_max,
                   c0=cfg.harvest_mid, c1=cfg.harvest_steepness)


def harvested_dc_power(p_rf, model: HarvesterModel):
    return model.dc_power(p_rf)


def harvested_energy_slot(wet_flags, gains, p_uav_tx: float, slot_len: float,
                          model: HarvesterModel) -> float:
    """Energy one node banks in one slot from every beaming UAV combined.

    RF superposes linearly at the antenna; the nonlinearity applies to the sum.
    """
    p_rf = float(np.dot(np.asarray(wet_flags, dtype=float), np.asarray(gains, dtype=float))) * p_uav_tx
    return float(model.dc_power(p_rf)) * slot_len


def propulsion_power(v, cfg: WorldConfig):
    """Rotary-wing propulsion power at level speed v (blade + parasite + induced)."""
    v = np.asarray(v, dtype=float)
    v2 = v * v
    blade = cfg.prop_blade_power * (1.0 + 3.0 * v2 / cfg.rotor_tip_speed ** 2)
    parasite = 0.5 * cfg.fuselage_drag_ratio * cfg.air_density * cfg.rotor_solidity \
        * cfg.rotor_disc_area * v2 * v
    e0_2 = cfg.hover_induced_speed ** 2
    induced = cfg.prop_induced_power * np.sqrt(
        np.sqrt(1.0 + v2 * v2 / (4.0 * e0_2 * e0_2)) - v2 / (2.0 * e0_2))
    out = blade + parasite + induced
    if out.ndim == 0:
        return float(out)
    return out


def uav_slot_energy(wdc_subslot_count: int, wet_flag: int, v: float, cfg: WorldConfig) -> float:
    """Total energy a UAV burns in one slot: collection + propulsion + beam."""
    return (wdc_subslot_count * cfg.p_wdc * cfg.subslot_len
            + float(propulsion_power(v, cfg)) * cfg.slot_len
            + wet_flag * cfg.p_uav_tx * cfg.slot_len)


def update_wn_battery(battery: float, flag: int, harvested: float,
                      tx_subslot_count: int, cfg: WorldConfig) -> float:
    """Next battery level of one ground node.

    Harvesters bank energy up to capacity; transmitters pay p_wn_tx per
    active sub-slot, floored at zero. A harvester with tx activity signals a
    scheduler bug and is rejected loudly.
    """
    if flag == 0:
        if tx_subslot_count:
            raise ValueError("harvesting node was scheduled to transmit (scheduler bug)")
        return min(cfg.b_wn_max, battery + harvested)
    return max(battery - tx_subslot_count * cfg.p_wn_tx * cfg.subslot_len, 0.0)


def update_uav_battery(battery: float, slot_energy: float) -> float:
    return max(battery - slot_energy, 0.0)
