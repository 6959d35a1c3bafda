"""Brute-force Monte-Carlo reference moments for the quantized transmit chain.

Every closed-form moment in `stats` and `txchain` has a simulation twin here:
the chain is run draw by draw and the requested moment is averaged, with an
elementwise standard error, so closed forms can be gated against simulation at
a stated number of standard errors. The library ships these oracles (not just
the tests) so `onebitlink --self-check` can revalidate the closed forms on any
host.

All estimates are reported in the stacked-real convention: a complex length-n
vector becomes [Re; Im] of length 2n, and cross moments E[a b^T] are 2n x 2n
real matrices holding the four quadrature blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ParameterError, quantize_1bit, substream
from .stats import (IM, RE, cov_pd, cov_xq_cond, cross_corr_cond,
                    cross_dither_pd, lmmse_gain, mean_pd, mean_xq_cond,
                    noise_stats, stack_ri)
from .txchain import TxConfig, bussgang_gain, cov_xd, cov_xq_unconditional, cov_y_unconditional

MIN_DRAWS = 10 ** 4

# When the dither sits far below a symbol's axis value, every draw emits the
# same sign and the plug-in standard error collapses to exactly zero while
# the closed form still differs by O(erfc(|x|/sigma)). A Clopper-Pearson
# style bound on the unseen flip probability (zero flips in n draws caps it
# at ~log(1/alpha)/n) admits a deviation of order |closed|/draws; the factor
# below covers single averages and sign products at alpha ~ exp(-25).
SATURATION_ALLOWANCE = 50.0

_CONDITIONAL_KINDS = frozenset({
    "mean_xq", "cross_xd_xq", "cov_xq", "mean_pd", "cross_d_pd", "cov_pd",
    "noise_mean", "noise_cov", "y_mean", "y_cov",
})
_GAUSS_KINDS = frozenset({
    "cov_xd_gauss", "cross_xd_xq_gauss", "cov_xq_gauss", "cov_y_gauss",
    "cross_qd_xd_gauss",
})


@dataclass(frozen=True)
class OracleEstimate:
    value: np.ndarray   # stacked-real moment estimate
    stderr: np.ndarray  # elementwise standard error of the estimate
    draws: int


class _MeanAcc:
    def __init__(self, dim):
        self.n = 0
        self.s = np.zeros(dim)
        self.s2 = np.zeros(dim)

    def add(self, X):
        self.n += X.shape[0]
        self.s += X.sum(axis=0)
        self.s2 += (X * X).sum(axis=0)

    def estimate(self) -> OracleEstimate:
        mean = self.s / self.n
        var = np.maximum(self.s2 / self.n - mean ** 2, 0.0)
        return OracleEstimate(mean, np.sqrt(var / self.n), self.n)


class _OuterAcc:
    def __init__(self, dim_a, dim_b):
        self.n = 0
        self.s = np.zeros((dim_a, dim_b))
        self.s2 = np.zeros((dim_a, dim_b))

    def add(self, A, B):
        self.n += A.shape[0]
        self.s += A.T @ B
        self.s2 += (A * A).T @ (B * B)

    def estimate(self) -> OracleEstimate:
        mean = self.s / self.n
        var = np.maximum(self.s2 / self.n - mean ** 2, 0.0)
        return OracleEstimate(mean, np.sqrt(var / self.n), self.n)


def _stack_rows(Z):
    return np.concatenate([Z.real, Z.imag], axis=1)


def _chunks(draws, chunk):
    done = 0
    while done < draws:
        step = min(chunk, draws - done)
        done += step
        yield step


def _run_conditional(x, H, G, cfg: TxConfig, rho, draws, rng, kinds, chunk):
    x = np.asarray(x, dtype=np.complex128)
    n = x.size
    m = None if H is None else np.asarray(H).shape[0]
    sig = np.sqrt(cfg.sigma2)
    need_pd = kinds & {"mean_pd", "cross_d_pd", "cov_pd", "noise_mean", "noise_cov"}
    need_rx = kinds & {"noise_mean", "noise_cov", "y_mean", "y_cov"}
    if need_rx and H is None:
        raise ParameterError("receive-side kinds need the channel matrix H")
    if need_pd and G is None:
        raise ParameterError("residual kinds need the linearization gain G")
    T = None if (H is None or G is None) else np.asarray(H) @ np.asarray(G)

    acc = {}
    for k in kinds:
        if k in ("mean_xq", "mean_pd"):
            acc[k] = _MeanAcc(2 * n)
        elif k in ("noise_mean", "y_mean"):
            acc[k] = _MeanAcc(2 * m)
        elif k in ("noise_cov", "y_cov"):
            acc[k] = _OuterAcc(2 * m, 2 * m)
        else:
            acc[k] = _OuterAcc(2 * n, 2 * n)

    for step in _chunks(draws, chunk):
        d = (rng.standard_normal((step, n)) + 1j * rng.standard_normal((step, n))) * (sig / np.sqrt(2))
        xd = x[None, :] + d
        xq = quantize_1bit(xd, cfg.eta)
        xq_s = _stack_rows(xq)
        if "mean_xq" in acc:
            acc["mean_xq"].add(xq_s)
        if "cross_xd_xq" in acc:
            acc["cross_xd_xq"].add(_stack_rows(xd), xq_s)
        if "cov_xq" in acc:
            acc["cov_xq"].add(xq_s, xq_s)
        if need_pd:
            pd = xq - xd @ np.asarray(G).T
            pd_s = _stack_rows(pd)
            if "mean_pd" in acc:
                acc["mean_pd"].add(pd_s)
            if "cross_d_pd" in acc:
                acc["cross_d_pd"].add(_stack_rows(d), pd_s)
            if "cov_pd" in acc:
                acc["cov_pd"].add(pd_s, pd_s)
        if need_rx:
            z = (rng.standard_normal((step, m)) + 1j * rng.standard_normal((step, m))) / np.sqrt(2)
            if kinds & {"noise_mean", "noise_cov"}:
                noise = np.sqrt(rho) * (d @ T.T + pd @ np.asarray(H).T) + z
                ns = _stack_rows(noise)
                if "noise_mean" in acc:
                    acc["noise_mean"].add(ns)
                if "noise_cov" in acc:
                    acc["noise_cov"].add(ns, ns)
            if kinds & {"y_mean", "y_cov"}:
                y = np.sqrt(rho) * xq @ np.asarray(H).T + z
                ys = _stack_rows(y)
                if "y_mean" in acc:
                    acc["y_mean"].add(ys)
                if "y_cov" in acc:
                    acc["y_cov"].add(ys, ys)

    return {k: a.estimate() for k, a in acc.items()}


def _run_gauss(W, H, cfg: TxConfig, rho, draws, rng, kinds, chunk):
    W = np.asarray(W)
    n, k_streams = W.shape
    m = None if H is None else np.asarray(H).shape[0]
    if kinds & {"cov_y_gauss"} and H is None:
        raise ParameterError("cov_y_gauss needs the channel matrix H")
    sig = np.sqrt(cfg.sigma2)
    B = None
    if "cross_qd_xd_gauss" in kinds:
        B = bussgang_gain(cov_xd(W, cfg.sigma2), cfg.eta)

    acc = {}
    for kind in kinds:
        dim = 2 * m if kind == "cov_y_gauss" else 2 * n
        acc[kind] = _OuterAcc(dim, dim)

    for step in _chunks(draws, chunk):
        s = (rng.standard_normal((step, k_streams)) + 1j * rng.standard_normal((step, k_streams))) / np.sqrt(2)
        d = (rng.standard_normal((step, n)) + 1j * rng.standard_normal((step, n))) * (sig / np.sqrt(2))
        xd = s @ W.T + d
        xq = quantize_1bit(xd, cfg.eta)
        xd_s, xq_s = _stack_rows(xd), _stack_rows(xq)
        if "cov_xd_gauss" in acc:
            acc["cov_xd_gauss"].add(xd_s, xd_s)
        if "cross_xd_xq_gauss" in acc:
            acc["cross_xd_xq_gauss"].add(xd_s, xq_s)
        if "cov_xq_gauss" in acc:
            acc["cov_xq_gauss"].add(xq_s, xq_s)
        if "cross_qd_xd_gauss" in acc:
            qd = xq - xd @ B.T
            acc["cross_qd_xd_gauss"].add(_stack_rows(qd), xd_s)
        if "cov_y_gauss" in acc:
            z = (rng.standard_normal((step, m)) + 1j * rng.standard_normal((step, m))) / np.sqrt(2)
            y = np.sqrt(rho) * xq @ np.asarray(H).T + z
            ys = _stack_rows(y)
            acc["cov_y_gauss"].add(ys, ys)

    return {k: a.estimate() for k, a in acc.items()}


def mc_moment(kind: str, x=None, H=None, cfg: TxConfig = None, rho: float = 1.0,
              draws: int = 10 ** 5, rng: np.random.Generator = None,
              W=None, G=None, chunk: int = 200_000) -> OracleEstimate:
    """Monte-Carlo estimate (with standard errors) of one chain moment.

    Conditional kinds fix the precoded vector x; the *_gauss kinds average
    over Gaussian symbols through the precoder W. Residual kinds default G to
    the closed-form linearization gain, since the residual is defined relative
    to it.
    """
    if cfg is None:
        raise ParameterError("cfg is required")
    if draws < MIN_DRAWS:
        raise ParameterError(f"draws must be at least {MIN_DRAWS}, got {draws}")
    if rng is None:
        rng = substream(0, 0)
    if kind in _CONDITIONAL_KINDS:
        if x is None:
            raise ParameterError(f"kind {kind!r} needs the fixed precoded vector x")
        if G is None and kind in ("mean_pd", "cross_d_pd", "cov_pd", "noise_mean", "noise_cov"):
            G = lmmse_gain(np.asarray(x, dtype=np.complex128), cfg.sigma2, cfg.eta)
        return _run_conditional(x, H, G, cfg, rho, draws, rng, {kind}, chunk)[kind]
    if kind in _GAUSS_KINDS:
        if W is None:
            raise ParameterError(f"kind {kind!r} needs the precoder W")
        return _run_gauss(W, H, cfg, rho, draws, rng, {kind}, chunk)[kind]
    raise ParameterError(f"unknown oracle kind {kind!r}")


def mc_gaussian_loglike(y_stacked, mu, Sigma) -> float:
    """Gaussian objective (y-mu)^T Sigma^{-1} (y-mu) + log det Sigma.

    Deliberately computed with a dense inverse and determinant (no Cholesky)
    so it is an independent cross-check of the detector's factorized path.
    """
    r = np.asarray(y_stacked, dtype=float) - np.asarray(mu, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    quad = float(r @ np.linalg.inv(Sigma) @ r)
    return quad + float(np.log(np.linalg.det(Sigma)))


# ---------------------------------------------------------------------------
# bundled validation (used by the CLI self-check and the acceptance gate)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InstanceSpec:
    n_tx: int
    n_rx: int
    n_streams: int
    sigma2: float
    rho: float
    seed: int


@dataclass(frozen=True)
class CheckRow:
    instance: str
    quantity: str
    entries: int
    within: int
    max_z: float

    @property
    def frac_within(self) -> float:
        return self.within / self.entries


def _axis_blocks(fn):
    """Assemble [[f(re,re), f(re,im)], [f(im,re), f(im,im)]]."""
    return np.block([[fn(RE, RE), fn(RE, IM)], [fn(IM, RE), fn(IM, IM)]])


def _embed_half(C):
    """Stacked-real second moment of jointly proper vectors: 0.5*[[Re,-Im],[Im,Re]]."""
    C = np.asarray(C)
    return 0.5 * np.block([[C.real, -C.imag], [C.imag, C.real]])


def closed_form_moments(x, H, W, G, cfg: TxConfig, rho: float) -> dict:
    """All closed-form moments for one instance, keyed like the oracle kinds."""
    s2, eta = cfg.sigma2, cfg.eta
    ns = noise_stats(H, x, G, s2, eta, rho)
    F = stack_ri(np.asarray(H) @ (np.asarray(G) @ np.asarray(x)))
    mu_y = np.sqrt(rho) * F + ns.mu
    C_y = (rho * np.outer(F, F)
           + np.sqrt(rho) * (np.outer(F, ns.mu) + np.outer(ns.mu, F))
           + ns.C)
    C_xd_g = cov_xd(W, s2)
    B = bussgang_gain(C_xd_g, eta)
    C_xq_g = cov_xq_unconditional(C_xd_g, eta)
    return {
        "mean_xq": stack_ri(mean_xq_cond(x, s2, eta)),
        "cross_xd_xq": _axis_blocks(lambda a, b: cross_corr_cond(x, s2, eta, a, b)),
        "cov_xq": _axis_blocks(lambda a, b: cov_xq_cond(x, s2, eta, a, b)),
        "mean_pd": stack_ri(mean_pd(x, G, s2, eta)),
        "cross_d_pd": _axis_blocks(lambda a, b: cross_dither_pd(x, G, s2, eta, a, b)),
        "cov_pd": _axis_blocks(lambda a, b: cov_pd(x, G, s2, eta, a, b)),
        "noise_mean": ns.mu,
        "noise_cov": ns.C,
        "y_mean": mu_y,
        "y_cov": C_y,
        "cov_xd_gauss": _embed_half(C_xd_g),
        "cross_xd_xq_gauss": _embed_half(C_xd_g @ B),
        "cov_xq_gauss": _embed_half(C_xq_g),
        "cov_y_gauss": _embed_half(cov_y_unconditional(H, C_xq_g, rho)),
        "cross_qd_xd_gauss": np.zeros((2 * np.asarray(x).size, 2 * np.asarray(x).size)),
    }


def validate_instance(spec: InstanceSpec, draws: int, se_mult: float = 4.0,
                      atol: float = 1e-12, chunk: int = 200_000) -> list[CheckRow]:
    """Gate every closed form of one random instance against simulation.

    An entry passes when |closed - estimate| <= se_mult * stderr + sat + atol
    where sat = SATURATION_ALLOWANCE * |closed| / draws absorbs saturated
    sign averages whose plug-in stderr is exactly zero, and the tiny absolute
    floor covers entries the chain produces exactly.
    """
    from .core import qam16

    rng = substream(spec.seed, 97)
    A = rng.standard_normal((spec.n_tx, spec.n_streams)) \
        + 1j * rng.standard_normal((spec.n_tx, spec.n_streams))
    W = np.linalg.qr(A)[0]
    H = (rng.standard_normal((spec.n_rx, spec.n_tx))
         + 1j * rng.standard_normal((spec.n_rx, spec.n_tx))) / np.sqrt(2)
    pts = qam16().points
    s = pts[rng.integers(0, pts.size, spec.n_streams)]
    x = W @ s

    cfg = TxConfig(sigma2=spec.sigma2, eta=1.0 / spec.n_tx, constellation=qam16())
    G = lmmse_gain(x, cfg.sigma2, cfg.eta)
    closed = closed_form_moments(x, H, W, G, cfg, spec.rho)

    cond = _run_conditional(x, H, G, cfg, spec.rho, draws, rng,
                            set(_CONDITIONAL_KINDS), chunk)
    gauss = _run_gauss(W, H, cfg, spec.rho, draws, rng, set(_GAUSS_KINDS), chunk)
    estimates = {**cond, **gauss}

    label = (f"N={spec.n_tx} M={spec.n_rx} K={spec.n_streams} "
             f"sigma2={spec.sigma2:g} rho={spec.rho:g}")
    rows = []
    for name, target in closed.items():
        est = estimates[name]
        err = np.abs(target - est.value)
        sat = SATURATION_ALLOWANCE * np.abs(target) / est.draws
        tol = se_mult * est.stderr + sat + atol
        z = err / np.maximum(est.stderr + sat / se_mult, atol)
        rows.append(CheckRow(instance=label, quantity=name,
                             entries=int(err.size), within=int(np.sum(err <= tol)),
                             max_z=float(z.max())))
    return rows


def default_instances(extra_random: int = 6, base_seed: int = 0) -> list[InstanceSpec]:
    """Instance grid used by the acceptance gate; >= 20 instances total."""
    specs = []
    seed = base_seed
    for n_tx in (2, 4, 8):
        for k in (1, 2):
            for s2 in (0.01, 0.1, 1.0):
                rng = substream(base_seed, 11, seed)
                specs.append(InstanceSpec(
                    n_tx=n_tx, n_rx=int(rng.integers(2, 5)), n_streams=min(k, n_tx),
                    sigma2=s2, rho=float(rng.uniform(0.5, 8.0)), seed=seed))
                seed += 1
    for _ in range(extra_random):
        rng = substream(base_seed, 11, seed)
        specs.append(InstanceSpec(
            n_tx=8, n_rx=int(rng.integers(2, 5)), n_streams=2,
            sigma2=float(rng.choice([0.01, 0.1, 1.0])),
            rho=float(rng.uniform(0.5, 8.0)), seed=seed))
        seed += 1
    return specs


def self_check(draws: int = 50_000, seed: int = 0, se_mult: float = 4.0,
               min_frac: float = 0.99) -> tuple[list[CheckRow], bool]:
    """Reduced validation pass for the command-line --self-check mode."""
    specs = [
        InstanceSpec(n_tx=4, n_rx=2, n_streams=1, sigma2=0.1, rho=2.0, seed=seed),
        InstanceSpec(n_tx=8, n_rx=3, n_streams=2, sigma2=0.5, rho=4.0, seed=seed + 1),
        InstanceSpec(n_tx=2, n_rx=2, n_streams=1, sigma2=1.0, rho=1.0, seed=seed + 2),
    ]
    rows = []
    for spec in specs:
        rows.extend(validate_instance(spec, draws=draws, se_mult=se_mult))
    ok = all(r.frac_within >= min_frac for r in rows)
    return rows, ok
