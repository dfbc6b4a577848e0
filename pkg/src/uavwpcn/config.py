"""World configuration: every physical, protocol, and learning constant in one place.

Unit conventions, used consistently across the whole package:
    distances/positions  meters
    time                 seconds
    power                watts
    energy               watt-seconds
    data                 bits/Hz (spectral efficiency times time)

dBm appears only at this boundary, via :func:`dbm_to_watts`. Everything
downstream works in watts.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path


def dbm_to_watts(x: float) -> float:
    """Convert a power level in dBm to watts: 10^((x - 30) / 10)."""
    return 10.0 ** ((x - 30.0) / 10.0)


def watts_to_dbm(p: float) -> float:
    """Inverse of :func:`dbm_to_watts`. Requires p > 0."""
    return 10.0 * math.log10(p) + 30.0


@dataclass(frozen=True)
class WorldConfig:
    """Immutable bundle of all constants for one scenario.

    Defaults describe the full-scale scenario (4 UAVs serving 10 ground
    nodes in a 400 m square). :func:`desk_config` shrinks it to a size
    where training finishes in minutes on a laptop.
    """

    # --- area and fleet ---
    area_width: float = 400.0
    area_height: float = 400.0
    num_uavs: int = 4
    num_wns: int = 10
    altitude: float = 5.0           # fixed flight height of every UAV
    d_min: float = 2.0              # minimum safe UAV separation
    d_cov: float = 20.0             # horizontal radius of status reporting
    v_max: float = 20.0             # maximum UAV speed

    # --- time structure ---
    horizon_slots: int = 300        # slots per episode (T)
    subslots_per_slot: int = 4      # K
    slot_len: float = 1.0           # seconds per slot
    subslot_len: float = 0.25       # seconds per sub-slot; slot_len = K * subslot_len

    # --- channel ---
    g0: float = 0.1                 # reference gain at 1 m (-10 dB)
    alpha_los: float = 3.0
    alpha_nlos: float = 5.0
    los_a: float = 12.08            # LoS-probability logistic constants
    los_b: float = 0.11             # (elevation angle measured in degrees)
    noise_power: float = 1e-12      # -90 dBm

    # --- radio powers ---
    p_uav_tx: float = 1.0           # UAV energy-beam transmit power
    p_wn_tx: float = 1e-4           # ground-node uplink transmit power (-10 dBW relative scale: 0.1 mW)
    p_wdc: float = 1e-2             # UAV-side receive/processing power while collecting

    # --- energy harvester (nonlinear RF-to-DC transform) ---
    p_sen: float = 1e-4             # sensitivity threshold, -10 dBm
    p_sat: float = dbm_to_watts(7.0)  # saturation threshold, 7 dBm
    harvest_max: float = 4.5e-3     # DC output at saturation
    harvest_mid: float = 1.5e-3     # logistic midpoint (watts RF)
    harvest_steepness: float = 2500.0  # logistic steepness (1/watts)

    # --- ground-node batteries and type thresholds ---
    b_e: float = 2e-3               # at or below: node becomes an energy harvester
    b_i: float = 4e-3               # at or above: node becomes a data transmitter
    b_wn_max: float = 6e-3
    wn_battery_init_low: float = 2e-3
    wn_battery_init_high: float = 4e-3

    # --- UAV battery ---
    b_uav_max: float = 4e5
    b_uav_min: float = 3e4          # reserve the UAV must keep at episode end

    # --- rotary-wing propulsion model ---
    prop_blade_power: float = 79.86     # blade profile power in hover
    prop_induced_power: float = 88.63   # induced power in hover
    rotor_tip_speed: float = 120.0
    hover_induced_speed: float = 4.03
    fuselage_drag_ratio: float = 0.6
    air_density: float = 1.225
    rotor_solidity: float = 0.05
    rotor_disc_area: float = 0.503

    # --- mission requirement and reward mixing ---
    c_min: float = 100.0            # per-node data requirement over the horizon
    xi_wet: float = 20.0
    xi_wdc: float = 0.01
    xi_es: float = 1e-6
    xi_sd: float = 1.0
    data_scale: float = 1000.0      # normalization constant for data features

    # --- learning ---
    gamma: float = 0.99
    tau: float = 0.999              # target-net retention in the soft update
    buffer_capacity: int = 131072
    batch_size: int = 128
    hidden_width: int = 256
    sac_lr: float = 3e-4
    alpha_lr: float = 2e-4
    alpha_init: float = 0.2
    entropy_target: float | None = None   # explicit override; None derives it below
    entropy_target_negated: bool = False  # derived target is +(3W+3); True flips the sign
    dqn_lr_start: float = 0.01
    dqn_lr_end: float = 1e-6
    eps_start: float = 0.9
    eps_end: float = 0.02
    eps_decay_frac: float = 0.8     # fraction of episodes over which epsilon decays
    target_sync_period: int = 200   # DQN target-net copy interval, in train steps
    actor_sync_slots: int = 1       # how often actor params are pushed to the UAVs
    dqn_train_per_subslot: bool = True

    seed: int = 0

    def resolved_entropy_target(self) -> float:
        """Entropy target for the tier-1 temperature loss.

        The derived value equals the observation length 3W+3 (negated when
        `entropy_target_negated`); an explicit `entropy_target` wins.
        """
        if self.entropy_target is not None:
            return float(self.entropy_target)
        target = float(3 * self.num_wns + 3)
        return -target if self.entropy_target_negated else target


_FIELD_NAMES = tuple(f.name for f in dataclasses.fields(WorldConfig))


def desk_config(**overrides) -> WorldConfig:
    """Small scenario used by the acceptance suite: 2 UAVs, 4 nodes, 150 m area.

    The narrower area, 64-wide hidden layers, 64-row minibatches, and
    once-per-slot scheduler updates keep a 200-episode training run in the
    low minutes per seed; the explicit entropy target (minus the action
    dimension) is the usual stable choice for a squashed 3-dimensional
    policy.
    """
    base = dict(
        area_width=150.0,
        area_height=150.0,
        num_uavs=2,
        num_wns=4,
        hidden_width=64,
        entropy_target=-3.0,
        batch_size=64,
        dqn_train_per_subslot=False,
    )
    base.update(overrides)
    return WorldConfig(**base)


def validate_config(cfg: WorldConfig) -> list[str]:
    """Return a list of violated-relation messages; empty means valid.

    Total function: never raises, reports every violated relation it finds.
    """
    v: list[str] = []
    if not (0.0 < cfg.p_sen < cfg.p_sat):
        v.append(f"p_sen/p_sat: need 0 < p_sen < p_sat, got p_sen={cfg.p_sen} p_sat={cfg.p_sat}")
    floor = cfg.p_wn_tx * cfg.slot_len
    if not (floor < cfg.b_e):
        v.append(f"b_e: need p_wn_tx*slot_len < b_e, got {floor} >= {cfg.b_e}")
    if not (cfg.b_e < cfg.b_i):
        v.append(f"b_e/b_i: need b_e < b_i, got b_e={cfg.b_e} b_i={cfg.b_i}")
    if not (cfg.b_i <= cfg.b_wn_max):
        v.append(f"b_i/b_wn_max: need b_i <= b_wn_max, got b_i={cfg.b_i} b_wn_max={cfg.b_wn_max}")
    if not math.isclose(cfg.slot_len, cfg.subslots_per_slot * cfg.subslot_len, rel_tol=1e-9):
        v.append(
            f"slot_len: need slot_len == subslots_per_slot*subslot_len, "
            f"got {cfg.slot_len} != {cfg.subslots_per_slot}*{cfg.subslot_len}"
        )
    if not (0.0 < cfg.alpha_los < cfg.alpha_nlos):
        v.append(
            f"alpha_los/alpha_nlos: need 0 < alpha_los < alpha_nlos, "
            f"got alpha_los={cfg.alpha_los} alpha_nlos={cfg.alpha_nlos}"
        )
    if cfg.num_uavs < 2:
        v.append(f"num_uavs: need num_uavs >= 2, got {cfg.num_uavs}")
    if not (cfg.num_wns > cfg.num_uavs):
        v.append(f"num_wns: need num_wns > num_uavs, got num_wns={cfg.num_wns} num_uavs={cfg.num_uavs}")
    return v


def config_to_dict(cfg: WorldConfig) -> dict:
    return dataclasses.asdict(cfg)


def config_from_dict(d: dict) -> WorldConfig:
    """Build a config from a (possibly partial) field dict; unknown keys are an error."""
    unknown = sorted(set(d) - set(_FIELD_NAMES))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    return WorldConfig(**d)


def load_config(path: str | Path) -> WorldConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"config at {path} is not a JSON object")
    return config_from_dict(doc)


def save_config(cfg: WorldConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
