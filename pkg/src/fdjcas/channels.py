"""Propagation matrix synthesis: spherical-wavefront near-field links for
everything around the co-located node and the RIS, rank-one far-field links
toward the downlink user, and the stochastic non-LoS self-interference
residual."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .geometry import Scene, pairwise_distances, ris_angles_of_point, ula_angle_of
from .steering import ula_steering, upa_steering

_MATRIX_FIELDS = (
    "bs_to_user",
    "ris_to_user",
    "bs_to_ris",
    "ris_to_bs",
    "si_los",
    "si_nlos",
)


@dataclass(frozen=True)
class ChannelSet:
    """All propagation matrices of one scenario realization.

    Shapes: ``bs_to_user`` (n_user, n_bs_tx), ``ris_to_user`` (n_user,
    n_ris), ``bs_to_ris`` (n_ris, n_bs_tx), ``ris_to_bs`` (n_bs_rx, n_ris),
    ``si_los``/``si_nlos`` (n_bs_rx, n_bs_tx).  ``noise_user`` and
    ``noise_radar`` are the receiver noise variances in watts.
    """

    bs_to_user: np.ndarray
    ris_to_user: np.ndarray
    bs_to_ris: np.ndarray
    ris_to_bs: np.ndarray
    si_los: np.ndarray
    si_nlos: np.ndarray
    noise_user: float = 1.0
    noise_radar: float = 1.0

    def __post_init__(self):
        for name in _MATRIX_FIELDS:
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=complex))
        n_user, n_tx = self.bs_to_user.shape
        n_ris = self.ris_to_user.shape[1]
        n_rx = self.ris_to_bs.shape[0]
        if self.bs_to_ris.shape != (n_ris, n_tx):
            raise ValueError("bs_to_ris shape inconsistent with the other links")
        if self.ris_to_bs.shape != (n_rx, n_ris):
            raise ValueError("ris_to_bs shape inconsistent with the other links")
        if self.si_los.shape != (n_rx, n_tx) or self.si_nlos.shape != (n_rx, n_tx):
            raise ValueError("self-interference shapes inconsistent with the arrays")
        # zero radar noise is allowed for noiseless snapshot studies; the
        # user-side noise divides receiver expressions and must stay positive
        if self.noise_user <= 0.0 or self.noise_radar < 0.0:
            raise ValueError("noise variances must be positive (radar may be zero)")

    @property
    def n_user(self) -> int:
        return self.bs_to_user.shape[0]

    @property
    def n_bs_tx(self) -> int:
        return self.bs_to_user.shape[1]

    @property
    def n_bs_rx(self) -> int:
        return self.ris_to_bs.shape[0]

    @property
    def n_ris(self) -> int:
        return self.ris_to_bs.shape[1]

    def save(self, path) -> None:
        """Dump to a single binary file: JSON header line naming shapes and
        scalars, then row-major float64 data with real/imag interleaved."""
        header = {
            "matrices": {name: list(getattr(self, name).shape) for name in _MATRIX_FIELDS},
            "scalars": {"noise_user": self.noise_user, "noise_radar": self.noise_radar},
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode("utf-8") + b"\n")
            for name in _MATRIX_FIELDS:
                mat = getattr(self, name)
                interleaved = np.empty(mat.shape + (2,), dtype=np.float64)
                interleaved[..., 0] = mat.real
                interleaved[..., 1] = mat.imag
                fh.write(interleaved.tobytes())

    @classmethod
    def load(cls, path) -> "ChannelSet":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode("utf-8"))
            fields = {}
            for name, shape in header["matrices"].items():
                count = 2 * int(np.prod(shape))
                raw = np.frombuffer(fh.read(count * 8), dtype=np.float64)
                raw = raw.reshape(tuple(shape) + (2,))
                fields[name] = raw[..., 0] + 1j * raw[..., 1]
        return cls(**fields, **header["scalars"])


def nearfield_los(tx_positions, rx_positions, wavelength: float) -> np.ndarray:
    """Deterministic spherical-wavefront channel between two nearby arrays.

    Entry (m, n) decays as 1/distance with phase -2*pi*distance/wavelength;
    the common amplitude is fixed so the squared Frobenius norm equals the
    number of entries.
    """
    dist = pairwise_distances(tx_positions, rx_positions)
    raw = np.exp(-2j * np.pi * dist / wavelength) / dist
    rho = np.sqrt(dist.size / np.sum(np.abs(raw) ** 2))
    return rho * raw


def farfield_los(rx_steering, tx_steering, gain: complex = 1.0) -> np.ndarray:
    """Rank-one far-field channel gain * a_rx * a_tx^T for unit-norm steering vectors."""
    return gain * np.outer(np.asarray(rx_steering), np.asarray(tx_steering))


def build_channel_set(
    scene: Scene,
    n_user_antennas: int = 5,
    nlos_si_power: float = 0.01,
    seed=0,
    noise_user: float = 1.0,
    noise_radar: float = 1.0,
    user_gain: complex = 1.0,
    ris_user_gain: complex = 1.0,
) -> ChannelSet:
    """Synthesize every link of the scenario.

    Near-field spherical-wavefront models cover the transmit-receive
    self-interference and both RIS legs; the user links are rank-one
    far-field channels at the geometric angles (the user carries a z-axis
    ULA).  The non-LoS self-interference residual has i.i.d. circular
    Gaussian entries scaled so its expected squared Frobenius norm is
    ``nlos_si_power`` times the entry count; generation is fully seeded.
    """
    d, lam = scene.spacing, scene.wavelength
    si_los = nearfield_los(scene.bs_tx_positions, scene.bs_rx_positions, lam)
    bs_to_ris = nearfield_los(scene.bs_tx_positions, scene.ris_positions, lam)
    ris_to_bs = nearfield_los(scene.ris_positions, scene.bs_rx_positions, lam)

    to_user = scene.user_position - scene.bs_tx_positions[0]
    a_bs = ula_steering(ula_angle_of(to_user), scene.n_bs_tx, d, lam)
    a_user = ula_steering(ula_angle_of(-to_user), n_user_antennas, d, lam)
    bs_to_user = farfield_los(a_user, a_bs, user_gain)

    ris_to_user_vec = scene.user_position - scene.ris_positions[0]
    user_angles = ris_angles_of_point(scene, scene.user_position)
    a_ris = upa_steering(user_angles.elevation, user_angles.azimuth, scene)
    a_user_ris = ula_steering(ula_angle_of(-ris_to_user_vec), n_user_antennas, d, lam)
    ris_to_user = farfield_los(a_user_ris, a_ris, ris_user_gain)

    shape = (scene.n_bs_rx, scene.n_bs_tx)
    if nlos_si_power == 0.0:
        si_nlos = np.zeros(shape, dtype=complex)
    else:
        rng = np.random.default_rng(seed)
        si_nlos = np.sqrt(nlos_si_power / 2.0) * (
            rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        )
    return ChannelSet(
        bs_to_user=bs_to_user,
        ris_to_user=ris_to_user,
        bs_to_ris=bs_to_ris,
        ris_to_bs=ris_to_bs,
        si_los=si_los,
        si_nlos=si_nlos,
        noise_user=noise_user,
        noise_radar=noise_radar,
    )


def strip_ris(channels: ChannelSet) -> ChannelSet:
    """Channel set with every RIS link zeroed, for RIS-free benchmarks."""
    return dataclasses.replace(
        channels,
        ris_to_user=np.zeros_like(channels.ris_to_user),
        bs_to_ris=np.zeros_like(channels.bs_to_ris),
        ris_to_bs=np.zeros_like(channels.ris_to_bs),
    )
