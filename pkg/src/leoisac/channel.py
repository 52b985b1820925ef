"""Link budgets and fading for the satellite downlink and the radar echo.

Everything here is linear-domain; dB/dBi conversions happen once at the
config boundary.  Lengths in meters, powers in watts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .geometry import AnglePair, UpaSpec, Vec3, bistatic_angle, steering_vector

SPEED_OF_LIGHT = 3.0e8
BOLTZMANN = 1.38e-23

BISTATIC = "bistatic"
MONOSTATIC = "monostatic"


def db_to_linear(x_db: float) -> float:
    return float(10.0 ** (x_db / 10.0))


def linear_to_db(x: float) -> float:
    return float(10.0 * np.log10(x))


@dataclass(frozen=True)
class RicianParams:
    """Rician factor and average power of the downlink fading coefficient."""

    kappa: float
    gamma: float

    def __post_init__(self) -> None:
        if self.kappa < 0:
            raise ValueError("Rician factor must be nonnegative")
        if self.gamma <= 0:
            raise ValueError("average channel power must be positive")


@dataclass(frozen=True)
class CommChannel:
    """One user's downlink state: fading draw, array response, noise ratio."""

    g: complex
    a: NDArray[np.complex128]
    rho: float

    def __post_init__(self) -> None:
        if self.rho <= 0:
            raise ValueError("noise-to-channel-power ratio must be positive")

    @property
    def h(self) -> NDArray[np.complex128]:
        return self.g * self.a


@dataclass(frozen=True)
class RadarLink:
    """Echo-path description between satellite, target, and receiver."""

    alpha: complex
    aod: AnglePair
    aoa: AnglePair
    r_tx: float
    r_rx: float
    r_los: float
    beta: float

    def __post_init__(self) -> None:
        if self.r_tx <= 0 or self.r_rx <= 0:
            raise ValueError("link distances must be positive")


def avg_channel_power(g_sat_dbi: float, g_ut_dbi: float, f_c: float, d: float) -> float:
    """Average downlink power gain: antenna gains times the free-space term
    (c / (4 pi f_c d))^2."""
    if d <= 0 or f_c <= 0:
        raise ValueError("distance and carrier frequency must be positive")
    fs = SPEED_OF_LIGHT / (4.0 * np.pi * f_c * d)
    return db_to_linear(g_sat_dbi) * db_to_linear(g_ut_dbi) * fs * fs


def sample_comm_channel(
    params: RicianParams,
    aod: AnglePair,
    upa: UpaSpec,
    sigma_c2: float,
    seed: int | np.random.Generator,
) -> CommChannel:
    """Draw one Rician fading coefficient and assemble the user channel.

    Real and imaginary parts of g are i.i.d. normal with mean
    sqrt(kappa*gamma / (2(kappa+1))) and variance gamma / (2(kappa+1)), so
    E[|g|^2] = gamma.
    """
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    mean = np.sqrt(params.kappa * params.gamma / (2.0 * (params.kappa + 1.0)))
    std = np.sqrt(params.gamma / (2.0 * (params.kappa + 1.0)))
    re, im = mean + std * rng.standard_normal(2)
    return CommChannel(
        g=complex(re, im),
        a=steering_vector(upa, aod),
        rho=sigma_c2 / params.gamma,
    )


def reflection_power(
    sat: Vec3,
    tar: Vec3,
    rx: Vec3,
    g_sat_dbi: float,
    g_rx_dbi: float,
    f_c: float,
    rcs_mono_m2: float,
    structure: str = BISTATIC,
) -> float:
    """Echo power gain |alpha|^2 from the radar equation.

    Bistatic form: G_sat G_rx c^2 sigma / ((4 pi)^3 r_tx^2 r_rx^2 f_c^2) with
    the angle-dependent cross section sigma = rcs_mono * cos(beta/2).  The
    monostatic variant keeps the transmitter-side distance on both legs and
    the head-on cross section.
    """
    sat = np.asarray(sat, dtype=float)
    tar = np.asarray(tar, dtype=float)
    rx = np.asarray(rx, dtype=float)
    r_tx = float(np.linalg.norm(tar - sat))
    if r_tx == 0.0:
        raise ValueError("target coincides with the satellite")
    if structure == BISTATIC:
        r_rx = float(np.linalg.norm(tar - rx))
        if r_rx == 0.0:
            raise ValueError("target coincides with the receiver")
        beta = bistatic_angle(sat, tar, rx)
        sigma = rcs_mono_m2 * np.cos(beta / 2.0)
    elif structure == MONOSTATIC:
        r_rx = r_tx
        sigma = rcs_mono_m2
    else:
        raise ValueError(f"unknown radar structure {structure!r}")
    num = db_to_linear(g_sat_dbi) * db_to_linear(g_rx_dbi) * SPEED_OF_LIGHT**2 * sigma
    den = (4.0 * np.pi) ** 3 * r_tx**2 * r_rx**2 * f_c**2
    return num / den


def noise_power(bandwidth_hz: float, temp_k: float) -> float:
    """Thermal noise power k_B * B * T in watts."""
    if bandwidth_hz <= 0 or temp_k < 0:
        raise ValueError("bandwidth must be positive and temperature nonnegative")
    return BOLTZMANN * bandwidth_hz * temp_k


def echo_path_loss_curve(
    target_xy_m: tuple[float, float],
    altitudes_m: NDArray[np.float64],
    sat: Vec3,
    rx: Vec3,
    g_sat_dbi: float,
    g_rx_dbi: float,
    f_c: float,
    rcs_mono_m2: float,
    structure: str,
) -> list[tuple[float, float]]:
    """Echo path loss -10 log10 |alpha|^2 versus target altitude.

    Includes both the two-leg spreading loss and the target reflection.
    """
    out = []
    for h in np.asarray(altitudes_m, dtype=float):
        if h <= 0:
            raise ValueError("altitudes must be positive")
        tar = np.array([target_xy_m[0], target_xy_m[1], h])
        p = reflection_power(sat, tar, rx, g_sat_dbi, g_rx_dbi, f_c, rcs_mono_m2, structure)
        out.append((float(h), -linear_to_db(p)))
    return out


def build_radar_link(
    sat: Vec3,
    tar: Vec3,
    rx: Vec3,
    g_sat_dbi: float,
    g_rx_dbi: float,
    f_c: float,
    rcs_mono_m2: float,
    phase_rad: float = 0.0,
) -> RadarLink:
    """Assemble the bistatic echo link for a static scene.

    The reflection coefficient magnitude comes from :func:`reflection_power`;
    its phase is not modeled physically and is supplied by the caller.
    """
    from .geometry import angles_from_positions

    sat = np.asarray(sat, dtype=float)
    tar = np.asarray(tar, dtype=float)
    rx = np.asarray(rx, dtype=float)
    power = reflection_power(sat, tar, rx, g_sat_dbi, g_rx_dbi, f_c, rcs_mono_m2, BISTATIC)
    return RadarLink(
        alpha=complex(np.sqrt(power) * np.exp(1j * phase_rad)),
        aod=angles_from_positions(sat, tar, "satellite"),
        aoa=angles_from_positions(rx, tar, "receiver"),
        r_tx=float(np.linalg.norm(tar - sat)),
        r_rx=float(np.linalg.norm(tar - rx)),
        r_los=float(np.linalg.norm(sat - rx)),
        beta=bistatic_angle(sat, tar, rx),
    )
