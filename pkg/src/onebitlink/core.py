"""Numerical building blocks: one-bit quantizer, error functions, factorizations,
constellations, and seeded RNG sub-streams.

Everything downstream (channel, transmit chain, receive statistics, detectors)
is built on the small set of primitives defined here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import lapack as _lapack
from scipy.special import erf as _erf


class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class SingularityError(ArithmeticError):
    """An operation hit a singular configuration (e.g. zero dither variance)."""


class FactorizationError(ArithmeticError):
    """Cholesky failed even after the maximum jitter escalation.

    Attributes
    ----------
    pivot : int
        Zero-based index of the first non-positive-definite leading minor.
    """

    def __init__(self, message, pivot: int):
        super().__init__(message)
        self.pivot = pivot


# ---------------------------------------------------------------------------
# one-bit quantizer
# ---------------------------------------------------------------------------

def _axis_magnitude(eta: float) -> float:
    """Per-axis output magnitude c ~ sqrt(eta/2), ulp-refined.

    c is chosen so that the per-entry squared modulus 2*fl(c*c) equals eta
    bit-exactly whenever a representable double allows it, which makes the
    total transmit power of an N-entry output sum to exactly N*eta for the
    power-of-two antenna counts used at scale. Falls back to the correctly
    rounded square root when no exact representable value exists.
    """
    c0 = math.sqrt(eta / 2.0)
    best, best_err = c0, abs(2.0 * (c0 * c0) - eta)
    up = dn = c0
    for _ in range(3):
        up = math.nextafter(up, math.inf)
        dn = math.nextafter(dn, -math.inf)
        for c in (up, dn):
            err = abs(2.0 * (c * c) - eta)
            if err < best_err:
                best, best_err = c, err
    return best


def quantize_1bit(x: np.ndarray, eta: float) -> np.ndarray:
    """Element-wise one-bit quantization of both quadratures.

    Maps each entry to c*(sgn(Re) + 1j*sgn(Im)) with c ~ sqrt(eta/2), with the
    convention sgn(0) = +1 so every output entry has squared modulus eta.

    Parameters
    ----------
    x : array_like of complex
        Input of any shape (batches allowed).
    eta : float
        Per-entry output power, must be > 0.
    """
    if not eta > 0:
        raise ParameterError(f"eta must be positive, got {eta}")
    x = np.asarray(x)
    c = _axis_magnitude(eta)
    re = np.where(x.real >= 0, c, -c)
    im = np.where(x.imag >= 0, c, -c)
    return re + 1j * im


# ---------------------------------------------------------------------------
# error functions
# ---------------------------------------------------------------------------

def erf_real(t):
    """Gauss error function (2/sqrt(pi)) * integral_0^t exp(-u^2) du, vectorized."""
    return _erf(t)


def erf_complex(z):
    """Per-axis extension erf(Re z) + 1j*erf(Im z).

    This is not the analytic continuation; both quadratures are passed through
    the real error function independently.
    """
    z = np.asarray(z)
    return _erf(z.real) + 1j * _erf(z.imag)


# ---------------------------------------------------------------------------
# factorizations
# ---------------------------------------------------------------------------

class CholFactor(NamedTuple):
    factor: np.ndarray   # lower triangular L with S + jitter*I = L L^T
    logdet: float
    jitter: float        # 0.0 when the input factorized as-is


def chol_logdet(S: np.ndarray) -> CholFactor:
    """Lower Cholesky factor and log-determinant of a symmetric PD matrix.

    On an indefinite input, retries with S + t*I where t starts at
    1e-12*trace(S)/dim and escalates by factors of 10 up to 1e-6*trace(S)/dim.
    Raises FactorizationError carrying the failing pivot index if the matrix is
    still not positive definite at maximum jitter.
    """
    S = np.ascontiguousarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {S.shape}")
    dim = S.shape[0]
    base = float(np.trace(S)) / dim
    jitters = [0.0] + [base * 10.0 ** k for k in range(-12, -5)]
    info = 0
    for t in jitters:
        St = S if t == 0.0 else S + t * np.eye(dim)
        c, info = _lapack.dpotrf(St, lower=1, overwrite_a=False)
        if info == 0:
            L = np.tril(c)
            logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
            return CholFactor(L, logdet, t)
    raise FactorizationError(
        f"matrix not positive definite at pivot {info - 1} even with jitter", pivot=info - 1
    )


class TopKSubspace(NamedTuple):
    vectors: np.ndarray          # (N, k), orthonormal columns
    singular_values: np.ndarray  # (k,), non-increasing


def svd_topk(H: np.ndarray, k: int) -> TopKSubspace:
    """Right singular vectors of H for its k largest singular values.

    Column phases are fixed so the largest-magnitude entry of each column is
    real and positive, which makes the output deterministic across runs.
    """
    H = np.asarray(H)
    if H.ndim != 2:
        raise ParameterError("H must be a matrix")
    if not 1 <= k <= min(H.shape):
        raise ParameterError(f"k={k} out of range for shape {H.shape}")
    _, sv, vh = np.linalg.svd(H, full_matrices=False)
    W = vh[:k].conj().T.copy()
    for j in range(k):
        col = W[:, j]
        i = int(np.argmax(np.abs(col)))
        phase = col[i] / abs(col[i])
        W[:, j] = col * np.conj(phase)
    return TopKSubspace(W, sv[:k].copy())


# ---------------------------------------------------------------------------
# constellations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constellation:
    """A finite symbol alphabet with unit average energy."""

    points: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128).ravel()
        object.__setattr__(self, "points", pts)
        if pts.size < 1:
            raise ParameterError("constellation needs at least one point")
        if len(np.unique(pts)) != pts.size:
            raise ParameterError("constellation points must be pairwise distinct")
        energy = float(np.mean(np.abs(pts) ** 2))
        if abs(energy - 1.0) > 1e-12:
            raise ParameterError(f"mean symbol energy must be 1, got {energy!r}")

    @property
    def size(self) -> int:
        return self.points.size


def qam16() -> Constellation:
    """16-QAM on {-3,-1,1,3}^2 / sqrt(10), enumerated real-part major."""
    levels = np.array([-3.0, -1.0, 1.0, 3.0])
    pts = (levels[:, None] + 1j * levels[None, :]).ravel() / np.sqrt(10.0)
    return Constellation(pts, "16qam")


def qpsk() -> Constellation:
    levels = np.array([-1.0, 1.0])
    pts = (levels[:, None] + 1j * levels[None, :]).ravel() / np.sqrt(2.0)
    return Constellation(pts, "qpsk")


_CONSTELLATIONS = {
    "16qam": qam16,
    "qpsk": qpsk,
    # degenerate single-point alphabet, useful for debugging the harness
    "single": lambda: Constellation(np.array([1.0 + 0.0j]), "single"),
}


def make_constellation(name: str) -> Constellation:
    try:
        factory = _CONSTELLATIONS[name.lower()]
    except KeyError:
        raise ParameterError(
            f"unknown constellation {name!r}; choose from {sorted(_CONSTELLATIONS)}"
        ) from None
    return factory()


# ---------------------------------------------------------------------------
# seeded RNG sub-streams
# ---------------------------------------------------------------------------

def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the sub-stream identified by (seed, *key).

    The same (seed, key) always yields the same draw sequence, and distinct
    keys yield statistically independent streams, so parallel work can be
    assigned stable per-unit randomness regardless of scheduling order.
    """
    if any(k < 0 for k in key):
        raise ParameterError("sub-stream key parts must be non-negative")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))
