"""Transmit chain: linear precoding, Gaussian dithering, one-bit quantization.

Also provides the symbol-averaged (unconditional) second-order statistics of
the chain: the dithered-signal covariance, the equivalent linear gain of the
quantizer under a Gaussian-input assumption, and the quantizer output
covariance reconstructed through the complex arcsine law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Constellation, ParameterError, SingularityError, quantize_1bit

_CLAMP = 1.0 - 1e-15


@dataclass(frozen=True)
class TxConfig:
    sigma2: float            # dither variance per antenna
    eta: float               # per-antenna output power of the quantizer
    constellation: Constellation

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ParameterError("dither variance must be non-negative")
        if not self.eta > 0:
            raise ParameterError("eta must be positive")


@dataclass(frozen=True)
class TxRealization:
    s: np.ndarray    # (K,) data symbols
    x: np.ndarray    # (N,) precoded signal W s
    x_d: np.ndarray  # (N,) dithered signal x + d
    x_q: np.ndarray  # (N,) one-bit quantizer output


def transmit(W: np.ndarray, s: np.ndarray, cfg: TxConfig,
             rng: np.random.Generator) -> TxRealization:
    """Run one symbol vector through precoding, dithering, and quantization.

    Requires eta = 1/n_tx so the transmitted vector has unit power.
    """
    W = np.asarray(W)
    s = np.asarray(s, dtype=np.complex128)
    n_tx = W.shape[0]
    if s.shape != (W.shape[1],):
        raise ParameterError(f"symbol vector shape {s.shape} does not match precoder {W.shape}")
    if abs(cfg.eta * n_tx - 1.0) > 1e-9:
        raise ParameterError(f"eta must equal 1/n_tx = 1/{n_tx}, got {cfg.eta}")
    x = W @ s
    scale = np.sqrt(cfg.sigma2 / 2.0)
    d = scale * (rng.standard_normal(n_tx) + 1j * rng.standard_normal(n_tx))
    x_d = x + d
    return TxRealization(s=s, x=x, x_d=x_d, x_q=quantize_1bit(x_d, cfg.eta))


def cov_xd(W: np.ndarray, sigma2: float) -> np.ndarray:
    """Covariance of the dithered signal for unit-power Gaussian symbols."""
    W = np.asarray(W)
    if sigma2 < 0:
        raise ParameterError("dither variance must be non-negative")
    return W @ W.conj().T + sigma2 * np.eye(W.shape[0])


def bussgang_gain(C_xd: np.ndarray, eta: float) -> np.ndarray:
    """Equivalent linear gain of the quantizer for a Gaussian input.

    The gain is the diagonal matrix sqrt(2*eta/pi) * Diag(C_xd)^(-1/2); the
    residual distortion is uncorrelated with the input by construction.
    """
    if not eta > 0:
        raise ParameterError("eta must be positive")
    dvar = np.diag(np.asarray(C_xd)).real
    if np.any(dvar <= 0):
        idx = int(np.argmax(dvar <= 0))
        raise SingularityError(f"input variance is zero on antenna {idx}")
    return np.diag(np.sqrt(2.0 * eta / np.pi) / np.sqrt(dvar))


def cov_xq_unconditional(C_xd: np.ndarray, eta: float) -> np.ndarray:
    """Quantizer output covariance for a Gaussian input, via the arcsine law.

    The normalized input correlations R feed elementwise
    (2*eta/pi) * (asin(Re R) + 1j*asin(Im R)); correlations are clamped to
    [-1+1e-15, 1-1e-15] so roundoff cannot push asin out of domain. The
    diagonal is set to exactly eta.
    """
    C_xd = np.asarray(C_xd)
    dvar = np.diag(C_xd).real
    if np.any(dvar <= 0):
        raise SingularityError("zero-variance antenna has no defined correlation")
    dinv = 1.0 / np.sqrt(dvar)
    R = C_xd * np.outer(dinv, dinv)
    re = np.clip(R.real, -_CLAMP, _CLAMP)
    im = np.clip(R.imag, -_CLAMP, _CLAMP)
    C = (2.0 * eta / np.pi) * (np.arcsin(re) + 1j * np.arcsin(im))
    np.fill_diagonal(C, eta)
    return C


def cov_y_unconditional(H: np.ndarray, C_xq: np.ndarray, rho: float) -> np.ndarray:
    """Received-signal covariance rho * H C_xq H^H + I for unit-power noise."""
    H = np.asarray(H)
    if rho < 0:
        raise ParameterError("transmit SNR must be non-negative")
    return rho * H @ np.asarray(C_xq) @ H.conj().T + np.eye(H.shape[0])
