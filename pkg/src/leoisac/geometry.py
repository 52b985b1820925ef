"""Array manifolds and bistatic scene geometry.

Coordinate conventions: right-handed Cartesian frame, radar receiver near the
origin, z pointing up.  The satellite array is boresighted at nadir (local z
down), the ground array at zenith (local z up); both share the global x/y
axes.  Azimuth theta is measured in the x-y plane from +x, the off-boresight
angle phi from the array normal.  All lengths are in meters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

Vec3 = NDArray[np.float64]

SATELLITE_FRAME = "satellite"
RECEIVER_FRAME = "receiver"


@dataclass(frozen=True)
class UpaSpec:
    """Uniform planar array with half-wavelength element spacing."""

    nx: int
    ny: int

    def __post_init__(self) -> None:
        if self.nx < 1 or self.ny < 1:
            raise ValueError("UPA dimensions must be positive integers")

    @property
    def size(self) -> int:
        return self.nx * self.ny


@dataclass(frozen=True)
class AnglePair:
    """Azimuth / off-boresight pair in radians.

    theta lies in (-pi, pi], phi in [0, pi/2] (boresight to horizon).
    """

    theta: float
    phi: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.theta) or not np.isfinite(self.phi):
            raise ValueError("angles must be finite")
        if not (-np.pi < self.theta <= np.pi + 1e-12):
            raise ValueError(f"azimuth {self.theta} outside (-pi, pi]")
        if not (-1e-12 <= self.phi <= np.pi / 2 + 1e-12):
            raise ValueError(f"off-boresight angle {self.phi} outside [0, pi/2]")


def steering_vector(upa: UpaSpec, ang: AnglePair) -> NDArray[np.complex128]:
    """Array response of a half-wavelength UPA.

    Kronecker product of the two axis responses; the element at grid position
    (nx, ny) carries phase -pi*[(nx-1) sin(phi) cos(theta)
    + (ny-1) sin(phi) sin(theta)].
    """
    u = np.sin(ang.phi) * np.cos(ang.theta)
    v = np.sin(ang.phi) * np.sin(ang.theta)
    ax = np.exp(-1j * np.pi * u * np.arange(upa.nx))
    ay = np.exp(-1j * np.pi * v * np.arange(upa.ny))
    return np.kron(ax, ay)


def steering_derivatives(
    upa: UpaSpec, ang: AnglePair
) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
    """Analytic partials of :func:`steering_vector` w.r.t. theta and phi.

    Each entry is the base entry times -j*pi times the derivative of its
    phase argument.
    """
    base = steering_vector(upa, ang)
    gx = np.kron(np.arange(upa.nx), np.ones(upa.ny))
    gy = np.kron(np.ones(upa.nx), np.arange(upa.ny))
    st, ct = np.sin(ang.theta), np.cos(ang.theta)
    sp, cp = np.sin(ang.phi), np.cos(ang.phi)
    dpsi_dtheta = sp * (-gx * st + gy * ct)
    dpsi_dphi = cp * (gx * ct + gy * st)
    return -1j * np.pi * dpsi_dtheta * base, -1j * np.pi * dpsi_dphi * base


def angles_from_positions(src: Vec3, dst: Vec3, frame: str) -> AnglePair:
    """Direction of ``dst`` as seen from an array at ``src``.

    ``frame`` selects the boresight convention: "satellite" measures phi from
    straight down, "receiver" from straight up.  Azimuth follows the
    quadrant-corrected arctangent of (dy, dx), with theta = 0 at boresight
    where azimuth is undefined.
    """
    d = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    r = float(np.linalg.norm(d))
    if r == 0.0:
        raise ValueError("coincident positions: direction undefined")
    dx, dy, dz = d
    if frame == SATELLITE_FRAME:
        cos_phi = -dz / r
    elif frame == RECEIVER_FRAME:
        cos_phi = dz / r
    else:
        raise ValueError(f"unknown frame {frame!r}")
    phi = float(np.arccos(np.clip(cos_phi, -1.0, 1.0)))

    if dx > 0:
        theta = float(np.arctan(dy / dx))
    elif dx < 0 and dy >= 0:
        theta = float(np.arctan(dy / dx)) + np.pi
    elif dx < 0:
        theta = float(np.arctan(dy / dx)) - np.pi
    elif dy > 0:
        theta = np.pi / 2
    elif dy < 0:
        theta = -np.pi / 2
    else:
        theta = 0.0
    if theta <= -np.pi:
        # tiny negative azimuths round onto the branch cut; -pi and +pi are
        # the same direction and the convention keeps +pi
        theta += 2.0 * np.pi
    return AnglePair(theta=theta, phi=phi)


def aoa_unit_vector(ang: AnglePair) -> Vec3:
    """Global unit vector from the receiver toward an arrival direction."""
    sp = np.sin(ang.phi)
    return np.array([sp * np.cos(ang.theta), sp * np.sin(ang.theta), np.cos(ang.phi)])


def bistatic_angle(sat: Vec3, tar: Vec3, rx: Vec3) -> float:
    """Angle at the target between the rays to the satellite and receiver."""
    u = np.asarray(sat, dtype=float) - np.asarray(tar, dtype=float)
    w = np.asarray(rx, dtype=float) - np.asarray(tar, dtype=float)
    ru = float(np.linalg.norm(u))
    rw = float(np.linalg.norm(w))
    if ru == 0.0 or rw == 0.0:
        raise ValueError("coincident points: bistatic angle undefined")
    return float(np.arccos(np.clip((u @ w) / (ru * rw), -1.0, 1.0)))


def invert_bistatic_ellipsoid(
    sat: Vec3, aoa_dir: Vec3, bistatic_range: float
) -> tuple[Vec3, float]:
    """Intersect the receive-direction ray with a constant-range ellipsoid.

    The receiver sits at the origin (near focus), the satellite at ``sat``
    (far focus).  ``bistatic_range`` is the summed receiver-target and
    target-satellite distance.  The law of cosines in the
    receiver-satellite-target triangle yields the receiver-to-target range

        r_rx = (range^2 - r_los^2) / (2 (range - r_los cos(eta)))

    with eta the angle between the satellite direction and the arrival ray.
    Returns (target position, r_rx).
    """
    sat = np.asarray(sat, dtype=float)
    d = np.asarray(aoa_dir, dtype=float)
    dn = float(np.linalg.norm(d))
    if abs(dn - 1.0) > 1e-6:
        raise ValueError("aoa_dir must be a unit vector")
    d = d / dn
    r_los = float(np.linalg.norm(sat))
    if bistatic_range <= r_los:
        raise ValueError(
            "inside-baseline: bistatic range must exceed the receiver-satellite distance"
        )
    cos_eta = float(sat @ d) / r_los
    denom = 2.0 * (bistatic_range - r_los * cos_eta)
    if denom <= 0.0:
        raise ValueError("degenerate colinear geometry")
    r_rx = (bistatic_range**2 - r_los**2) / denom
    return r_rx * d, r_rx
