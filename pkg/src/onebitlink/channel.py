"""Clustered multipath MIMO channel model and the matched linear precoder.

The channel is a sum of planar-wave paths between two uniform linear arrays:
each path has an i.i.d. complex normal gain and departure/arrival angles drawn
uniformly inside an angular spread around broadside. Entries come out with
unit average power.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .core import ParameterError, TopKSubspace, svd_topk


@dataclass(frozen=True)
class ChannelParams:
    n_rx: int
    n_tx: int
    n_paths: int = 100
    angular_spread: float = np.pi / 6
    center_aoa: float = 0.0
    center_aod: float = 0.0
    spacing: float = 0.5  # element spacing in carrier wavelengths

    def __post_init__(self):
        if self.n_rx < 1 or self.n_tx < 1:
            raise ParameterError("antenna counts must be positive")
        if self.n_paths < 1:
            raise ParameterError("need at least one propagation path")
        if self.angular_spread < 0:
            raise ParameterError("angular spread must be non-negative")


@dataclass(frozen=True)
class ChannelRealization:
    H: np.ndarray                 # (n_rx, n_tx)
    W: np.ndarray                 # (n_tx, n_streams), orthonormal columns
    singular_values: np.ndarray   # (n_streams,), non-increasing


def steering(n_antennas: int, angle: float, spacing: float = 0.5) -> np.ndarray:
    """ULA steering vector exp(1j*2*pi*spacing*i*sin(angle)), i = 0..n-1."""
    idx = np.arange(n_antennas)
    return np.exp(1j * 2.0 * np.pi * spacing * idx * np.sin(angle))


def draw_path_angles(params: ChannelParams,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per-path (arrival, departure) angles, uniform in center +- spread/2."""
    half = params.angular_spread / 2.0
    aoa = rng.uniform(params.center_aoa - half, params.center_aoa + half,
                      size=params.n_paths)
    aod = rng.uniform(params.center_aod - half, params.center_aod + half,
                      size=params.n_paths)
    return aoa, aod


def draw_channel(params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """One channel realization H with E|H_{m,n}|^2 = 1.

    H = (1/sqrt(P)) * sum_p g_p a_rx(theta_p) a_tx(phi_p)^H with g_p ~ CN(0,1)
    and both angle sets uniform in [center - spread/2, center + spread/2].
    """
    p = params
    aoa, aod = draw_path_angles(p, rng)
    gains = (rng.standard_normal(p.n_paths) + 1j * rng.standard_normal(p.n_paths)) / np.sqrt(2.0)

    idx_rx = np.arange(p.n_rx)[:, None]
    idx_tx = np.arange(p.n_tx)[:, None]
    a_rx = np.exp(1j * 2.0 * np.pi * p.spacing * idx_rx * np.sin(aoa)[None, :])  # (M, P)
    a_tx = np.exp(1j * 2.0 * np.pi * p.spacing * idx_tx * np.sin(aod)[None, :])  # (N, P)
    return (a_rx * gains[None, :]) @ a_tx.conj().T / np.sqrt(p.n_paths)


def make_precoder(H: np.ndarray, n_streams: int) -> TopKSubspace:
    """Precoder = right singular vectors of H for the top n_streams modes."""
    return svd_topk(H, n_streams)


def realize_channel(params: ChannelParams, n_streams: int,
                    rng: np.random.Generator) -> ChannelRealization:
    H = draw_channel(params, rng)
    W, sv = make_precoder(H, n_streams)
    return ChannelRealization(H, W, sv)


# ---------------------------------------------------------------------------
# channel file format
# ---------------------------------------------------------------------------
#
# Binary layout (little endian):
#   bytes 0:4   magic b"OBL1"
#   bytes 4:8   uint32 format version (1)
#   bytes 8:12  uint32 n_rx
#   bytes 12:16 uint32 n_tx
#   then n_rx*n_tx complex entries, row major, each a float64 (re, im) pair.

_MAGIC = b"OBL1"
_HEADER = struct.Struct("<4sIII")


def save_channel(path, H: np.ndarray) -> None:
    """Write a channel matrix in the documented binary format."""
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim != 2:
        raise ParameterError("H must be a matrix")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, H.shape[0], H.shape[1]))
        fh.write(np.ascontiguousarray(H).astype("<c16").tobytes())


def load_channel(path) -> np.ndarray:
    """Read a channel matrix written by save_channel."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ParameterError(f"{path}: truncated header")
        magic, version, m, n = _HEADER.unpack(head)
        if magic != _MAGIC or version != 1:
            raise ParameterError(f"{path}: not a version-1 channel file")
        buf = fh.read()
    expected = m * n * 16
    if len(buf) != expected:
        raise ParameterError(f"{path}: expected {expected} payload bytes, got {len(buf)}")
    return np.frombuffer(buf, dtype="<c16").reshape(m, n).astype(np.complex128)
