"""Experiment configuration and derived scene quantities.

Configs are YAML with kilometers / dB / dBW units and a closed key set
(unknown keys are rejected; defaults reproduce the reference simulation
setup).  `Scene` carries the same information converted once into meters and
linear units plus every derived quantity the designer and estimators
consume: user departure angles and array responses, noise powers, the echo
link, and the accuracy-bound context.
"""
from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml
from numpy.typing import NDArray

from . import channel as ch
from .crb import CrbContext, crb_trace_requirement
from .geometry import (
    AnglePair,
    UpaSpec,
    Vec3,
    angles_from_positions,
    steering_derivatives,
    steering_vector,
)
from .precoder import DesignInputs, OptConfig
from .rates import ModeConfig


class ConfigError(ValueError):
    """Raised on malformed or inconsistent configuration input."""


UNIFORM_DISK = "uniform-disk"
EXPLICIT = "explicit"

DEFAULT_CONFIG: dict[str, Any] = {
    "satellite_position_km": [30.0, -30.0, 340.0],
    "receiver_position_km": [0.0, 0.0, 0.0],
    "target_position_km": [3.0, 3.0, 5.0],
    "users": {
        "placement": UNIFORM_DISK,
        "count": 4,
        "diameter_km": 100.0,
        "positions_km": None,
    },
    "tx_array": {"nx": 8, "ny": 8},
    "rx_array": {"nx": 32, "ny": 32},
    "carrier_hz": 2.0e9,
    "bandwidth_hz": 1.0e7,
    "noise_temp_k": 150.0,
    "sat_gain_dbi": 6.0,
    "rx_gain_dbi": 3.0,
    "user_gain_dbi": 0.0,
    "rician_k_db": 10.0,
    "rcs_mono_m2": 100.0,
    "power_dbw": 20.0,
    "crb_threshold_theta": 8.0e-7,
    "crb_threshold_phi": 8.0e-7,
    "frame_length": 4096,
    "tau_max": 256,
    "range_window_start_km": None,
    "target_doppler_hz": None,
    "doppler_range_hz": [-30000.0, 30000.0],
    "alpha_phase_rad": 0.0,
    "mode": {
        "multiple_access": "rsma",
        "radar_sequence": True,
        "sic_of_radar": True,
        "comm_only": False,
    },
    "seeds": {"users": 1, "streams": 2, "channel": 3, "noise": 4, "doppler": 5},
    "opt": {
        "eps_rank": 0.9999,
        "eps_obj": 1.0e-4,
        "delta0": 0.1,
        "m_max": 60,
        "n_max": 30,
    },
}

#: Reduced array / frame sizes that keep each conic subproblem and the
#: covariance eigendecomposition interactive on a laptop.
DESK_PROFILE: dict[str, Any] = {
    "tx_array": {"nx": 4, "ny": 4},
    "rx_array": {"nx": 8, "ny": 8},
    "frame_length": 512,
}


def _merge_strict(defaults: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(defaults[key], dict) and not isinstance(value, dict) and value is not None:
            raise ConfigError(f"config key {where} must be a mapping")
        if isinstance(defaults[key], dict) and isinstance(value, dict):
            out[key] = _merge_strict(defaults[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated experiment description in config units (km, dB, dBW)."""

    data: dict[str, Any] = field(default_factory=lambda: copy.deepcopy(DEFAULT_CONFIG))

    @classmethod
    def from_dict(cls, raw: dict[str, Any] | None, profile: str | None = None) -> "ScenarioConfig":
        merged = _merge_strict(DEFAULT_CONFIG, raw or {})
        if profile == "desk":
            for key, value in DESK_PROFILE.items():
                merged[key] = copy.deepcopy(value)
        elif profile not in (None, "paper"):
            raise ConfigError(f"unknown profile {profile!r}")
        cfg = cls(merged)
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, path: str, profile: str | None = None) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping")
        return cls.from_dict(raw, profile=profile)

    def to_yaml(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(self.data, fh, sort_keys=True)

    def sha256(self) -> str:
        canon = yaml.safe_dump(self.data, sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()

    def validate(self) -> None:
        d = self.data
        for key in ("satellite_position_km", "receiver_position_km", "target_position_km"):
            pos = d[key]
            if not (isinstance(pos, (list, tuple)) and len(pos) == 3):
                raise ConfigError(f"{key} must be a 3-vector")
            if not all(np.isfinite(v) for v in pos):
                raise ConfigError(f"{key} must be finite")
        users = d["users"]
        if users["placement"] not in (UNIFORM_DISK, EXPLICIT):
            raise ConfigError("users.placement must be uniform-disk or explicit")
        if users["placement"] == EXPLICIT:
            if not users["positions_km"]:
                raise ConfigError("explicit user placement requires positions_km")
        elif int(users["count"]) < 1:
            raise ConfigError("at least one user is required")
        for arr in ("tx_array", "rx_array"):
            if int(d[arr]["nx"]) < 1 or int(d[arr]["ny"]) < 1:
                raise ConfigError(f"{arr} dimensions must be positive")
        for key in ("carrier_hz", "bandwidth_hz", "rcs_mono_m2"):
            if d[key] <= 0:
                raise ConfigError(f"{key} must be positive")
        if d["noise_temp_k"] < 0:
            raise ConfigError("noise_temp_k must be nonnegative")
        if d["crb_threshold_theta"] <= 0 or d["crb_threshold_phi"] <= 0:
            raise ConfigError("accuracy thresholds must be positive")
        if int(d["frame_length"]) < 1 or int(d["tau_max"]) < 1:
            raise ConfigError("frame_length and tau_max must be positive")
        try:
            ModeConfig(**d["mode"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid mode: {exc}") from exc

    @property
    def mode(self) -> ModeConfig:
        return ModeConfig(**self.data["mode"])


def _user_positions_m(cfg: ScenarioConfig) -> NDArray[np.float64]:
    """Ground positions of the users in meters.

    Random placement draws uniformly from a disk of the configured diameter
    centered at the sub-satellite point (the middle of the served coverage).
    """
    users = cfg.data["users"]
    if users["placement"] == EXPLICIT:
        pos = np.asarray(users["positions_km"], dtype=float) * 1e3
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ConfigError("positions_km must be a list of 3-vectors")
        return pos
    rng = np.random.default_rng(int(cfg.data["seeds"]["users"]))
    count = int(users["count"])
    radius = float(users["diameter_km"]) * 1e3 / 2.0
    center = np.asarray(cfg.data["satellite_position_km"][:2], dtype=float) * 1e3
    r = radius * np.sqrt(rng.random(count))
    ang = 2.0 * np.pi * rng.random(count)
    out = np.zeros((count, 3))
    out[:, 0] = center[0] + r * np.cos(ang)
    out[:, 1] = center[1] + r * np.sin(ang)
    return out


@dataclass(frozen=True)
class Scene:
    """Config converted to SI/linear units plus derived model quantities."""

    config: ScenarioConfig
    sat: Vec3
    rx: Vec3
    tar: Vec3
    user_positions: NDArray[np.float64]
    tx_upa: UpaSpec
    rx_upa: UpaSpec
    f_c: float
    bandwidth: float
    t_s: float
    p_t: float
    sigma_c2: float
    sigma_r2: float
    kappa: float
    gammas: NDArray[np.float64]
    rhos: NDArray[np.float64]
    user_aods: list[AnglePair]
    a_users: NDArray[np.complex128]
    target_aod: AnglePair
    target_aoa: AnglePair
    a_tar: NDArray[np.complex128]
    b_tar: NDArray[np.complex128]
    link: ch.RadarLink
    crb_ctx: CrbContext
    crb_thresholds: tuple[float, float]
    frame_length: int
    tau_max: int
    range_window_start_m: float
    mode: ModeConfig

    @property
    def num_users(self) -> int:
        return self.a_users.shape[0]

    def required_target_gain(self) -> float:
        return crb_trace_requirement(self.crb_ctx, *self.crb_thresholds)

    def design_inputs(self) -> DesignInputs:
        return DesignInputs(
            a_users=self.a_users,
            rhos=self.rhos,
            a_tar=self.a_tar,
            required_target_gain=0.0 if self.mode.comm_only else self.required_target_gain(),
        )

    def opt_config(self, p_t: float | None = None, mode: ModeConfig | None = None) -> OptConfig:
        opt = self.config.data["opt"]
        return OptConfig(
            p_t=self.p_t if p_t is None else p_t,
            mode=self.mode if mode is None else mode,
            eps_rank=float(opt["eps_rank"]),
            eps_obj=float(opt["eps_obj"]),
            delta0=float(opt["delta0"]),
            m_max=int(opt["m_max"]),
            n_max=int(opt["n_max"]),
        )

    def true_bistatic_range(self) -> float:
        return self.link.r_tx + self.link.r_rx

    def true_delay_bin(self) -> int:
        """Target delay in samples relative to the search-window start."""
        absolute = self.true_bistatic_range() / (ch.SPEED_OF_LIGHT * self.t_s)
        start = self.range_window_start_m / (ch.SPEED_OF_LIGHT * self.t_s)
        rel = int(round(absolute - start))
        if not 1 <= rel <= self.tau_max:
            raise ConfigError(
                f"target delay bin {rel} falls outside the search window 1..{self.tau_max}; "
                "adjust range_window_start_km or tau_max"
            )
        return rel

    def draw_doppler(self) -> float:
        fixed = self.config.data["target_doppler_hz"]
        if fixed is not None:
            return float(fixed)
        lo, hi = self.config.data["doppler_range_hz"]
        rng = np.random.default_rng(int(self.config.data["seeds"]["doppler"]))
        return float(rng.uniform(lo, hi))


def build_scene(cfg: ScenarioConfig, mode: ModeConfig | None = None) -> Scene:
    """Derive every model quantity from a validated config."""
    d = cfg.data
    sat = np.asarray(d["satellite_position_km"], dtype=float) * 1e3
    rx = np.asarray(d["receiver_position_km"], dtype=float) * 1e3
    tar = np.asarray(d["target_position_km"], dtype=float) * 1e3
    tx_upa = UpaSpec(int(d["tx_array"]["nx"]), int(d["tx_array"]["ny"]))
    rx_upa = UpaSpec(int(d["rx_array"]["nx"]), int(d["rx_array"]["ny"]))
    f_c = float(d["carrier_hz"])
    bandwidth = float(d["bandwidth_hz"])
    sigma2 = ch.noise_power(bandwidth, float(d["noise_temp_k"]))
    kappa = ch.db_to_linear(float(d["rician_k_db"]))
    p_t = ch.db_to_linear(float(d["power_dbw"]))

    user_pos = _user_positions_m(cfg)
    if user_pos.shape[0] < 1:
        raise ConfigError("at least one user is required")
    aods = [angles_from_positions(sat, u, "satellite") for u in user_pos]
    a_users = np.stack([steering_vector(tx_upa, ang) for ang in aods])
    dists = np.linalg.norm(user_pos - sat, axis=1)
    gammas = np.array(
        [
            ch.avg_channel_power(float(d["sat_gain_dbi"]), float(d["user_gain_dbi"]), f_c, dist)
            for dist in dists
        ]
    )
    rhos = sigma2 / gammas

    link = ch.build_radar_link(
        sat,
        tar,
        rx,
        float(d["sat_gain_dbi"]),
        float(d["rx_gain_dbi"]),
        f_c,
        float(d["rcs_mono_m2"]),
        phase_rad=float(d["alpha_phase_rad"]),
    )
    a_tar = steering_vector(tx_upa, link.aod)
    b_tar = steering_vector(rx_upa, link.aoa)
    db_theta, db_phi = steering_derivatives(rx_upa, link.aoa)
    crb_ctx = CrbContext(
        alpha2=float(abs(link.alpha) ** 2),
        sigma_r2=sigma2,
        num_samples=int(d["frame_length"]),
        a_tar=a_tar,
        db_theta=db_theta,
        db_phi=db_phi,
    )

    start_km = d["range_window_start_km"]
    range_window_start_m = link.r_los if start_km is None else float(start_km) * 1e3

    return Scene(
        config=cfg,
        sat=sat,
        rx=rx,
        tar=tar,
        user_positions=user_pos,
        tx_upa=tx_upa,
        rx_upa=rx_upa,
        f_c=f_c,
        bandwidth=bandwidth,
        t_s=1.0 / bandwidth,
        p_t=p_t,
        sigma_c2=sigma2,
        sigma_r2=sigma2,
        kappa=kappa,
        gammas=gammas,
        rhos=rhos,
        user_aods=aods,
        a_users=a_users,
        target_aod=link.aod,
        target_aoa=link.aoa,
        a_tar=a_tar,
        b_tar=b_tar,
        link=link,
        crb_ctx=crb_ctx,
        crb_thresholds=(float(d["crb_threshold_theta"]), float(d["crb_threshold_phi"])),
        frame_length=int(d["frame_length"]),
        tau_max=int(d["tau_max"]),
        range_window_start_m=range_window_start_m,
        mode=cfg.mode if mode is None else mode,
    )
