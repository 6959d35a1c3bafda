"""Experiment driver: seeded SER sweeps over dither power or SNR, CSV output.

One sweep = many independent channel realizations x one grid of operating
points. Per channel, the symbol/dither/noise randomness is drawn once from
dedicated sub-streams and re-scaled at every grid point (common random
numbers), so curves differ only through the operating point and not through
sampling noise. Work is parallelized across channels; error counts are exactly
reproducible for any worker count.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from math import pi

import numpy as np

from .channel import ChannelParams, draw_channel, make_precoder
from .core import ParameterError, make_constellation, quantize_1bit, substream
from .detect import (MAX_TABLE, build_candidate_kernels, build_candidate_table,
                     ml_detect_batch, slice_min_distance_batch, blmmse_combiner)
from .txchain import bussgang_gain, cov_xd, cov_xq_unconditional

VERSION = "0.1.0"

# rng sub-stream purposes; streams are keyed (seed, channel index, purpose)
CHANNEL = 0
SYMBOLS = 1
DITHER = 2
NOISE = 3
GUESS = 4

KNOWN_DETECTORS = ("ml", "blmmse", "guess")

CSV_HEADER = "param_name,param_value,detector,errors,trials,ser,seconds"


def dbm_to_linear(v: float) -> float:
    """Power in dBm -> linear watts (unit transmit power sits at 30 dBm)."""
    return 10.0 ** ((float(v) - 30.0) / 10.0)


@dataclass(frozen=True)
class ExperimentConfig:
    n_tx: int = 128
    n_rx: int = 16
    n_streams: int = 1
    rho_db: tuple = (5.0,)
    dither_dbm: tuple = (2.0,)
    n_channels: int = 10
    n_symbol_vectors: int = 2000
    seed: int = 0
    detectors: tuple = ("ml", "blmmse")
    constellation: str = "16qam"
    n_paths: int = 100
    angular_spread: float = pi / 6
    workers: int = 1
    max_candidates: int = MAX_TABLE
    output: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "rho_db", tuple(float(v) for v in _as_list(self.rho_db)))
        object.__setattr__(self, "dither_dbm", tuple(float(v) for v in _as_list(self.dither_dbm)))
        object.__setattr__(self, "detectors", tuple(_as_list(self.detectors)))
        for name in ("n_tx", "n_rx", "n_streams", "n_channels", "n_symbol_vectors",
                     "n_paths", "workers", "max_candidates"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ParameterError(f"{name} must be a positive integer, got {v!r}")
        if self.n_streams > min(self.n_tx, self.n_rx):
            raise ParameterError("n_streams must not exceed min(n_tx, n_rx)")
        if self.seed < 0:
            raise ParameterError("seed must be non-negative")
        if not self.rho_db or not self.dither_dbm:
            raise ParameterError("rho_db and dither_dbm must be non-empty")
        if len(self.rho_db) > 1 and len(self.dither_dbm) > 1:
            raise ParameterError("only one of rho_db / dither_dbm may be a grid")
        if not self.detectors:
            raise ParameterError("detectors must be non-empty")
        for d in self.detectors:
            if d not in KNOWN_DETECTORS:
                raise ParameterError(f"unknown detector {d!r}; choose from {KNOWN_DETECTORS}")
        if len(set(self.detectors)) != len(self.detectors):
            raise ParameterError("detectors must not repeat")
        make_constellation(self.constellation)  # raises on unknown name

    def sweep_points(self):
        """(axis name, [(axis value, sigma2 linear, rho linear), ...])."""
        if len(self.dither_dbm) > 1:
            rho = 10.0 ** (self.rho_db[0] / 10.0)
            return "dither_dbm", [(v, dbm_to_linear(v), rho) for v in self.dither_dbm]
        sigma2 = dbm_to_linear(self.dither_dbm[0])
        return "rho_db", [(v, sigma2, 10.0 ** (v / 10.0)) for v in self.rho_db]

    def digest(self) -> str:
        payload = {k: list(v) if isinstance(v, tuple) else v
                   for k, v in asdict(self).items() if k != "output"}
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class SweepRow:
    param_name: str
    param_value: float
    detector: str
    errors: int
    trials: int
    ser: float
    seconds: float


@dataclass(frozen=True)
class SweepReport:
    rows: tuple
    seed: int
    config_digest: str
    version: str = VERSION


def _as_list(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return list(v)
    return [v]


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _run_channel(cfg: ExperimentConfig, channel_index: int):
    """Error counts and wall seconds for one channel, keyed (point, detector)."""
    const = make_constellation(cfg.constellation)
    params = ChannelParams(n_rx=cfg.n_rx, n_tx=cfg.n_tx, n_paths=cfg.n_paths,
                           angular_spread=cfg.angular_spread)
    H = draw_channel(params, substream(cfg.seed, channel_index, CHANNEL))
    W = make_precoder(H, cfg.n_streams).vectors
    eta = 1.0 / cfg.n_tx

    nv, k = cfg.n_symbol_vectors, cfg.n_streams
    true_digits = substream(cfg.seed, channel_index, SYMBOLS).integers(0, const.size, size=(nv, k))
    S = const.points[true_digits]
    X = S @ W.T
    U = _cn(substream(cfg.seed, channel_index, DITHER), (nv, cfg.n_tx))
    Z = _cn(substream(cfg.seed, channel_index, NOISE), (nv, cfg.n_rx))
    guess_digits = None
    if "guess" in cfg.detectors:
        guess_digits = substream(cfg.seed, channel_index, GUESS).integers(0, const.size, size=(nv, k))

    points = cfg.sweep_points()[1]
    kernel_cache = {}
    combiner_cache = {}
    if "ml" in cfg.detectors or "blmmse" in cfg.detectors:
        for _, sigma2, _ in points:
            if "ml" in cfg.detectors and sigma2 not in kernel_cache:
                kernel_cache[sigma2] = build_candidate_kernels(
                    H, W, const, sigma2, eta, max_candidates=cfg.max_candidates)
            if "blmmse" in cfg.detectors and sigma2 not in combiner_cache:
                C_xd = cov_xd(W, sigma2)
                combiner_cache[sigma2] = (bussgang_gain(C_xd, eta),
                                          cov_xq_unconditional(C_xd, eta))

    out = {}
    for idx, (_, sigma2, rho) in enumerate(points):
        Xq = quantize_1bit(X + np.sqrt(sigma2) * U, eta)
        Y = np.sqrt(rho) * Xq @ H.T + Z
        for det in cfg.detectors:
            t0 = time.perf_counter()
            if det == "ml":
                table = build_candidate_table(H, W, const, sigma2, eta, rho,
                                              kernels=kernel_cache[sigma2],
                                              max_candidates=cfg.max_candidates)
                decided = ml_detect_batch(Y, table)[0]
            elif det == "blmmse":
                B, C_xq = combiner_cache[sigma2]
                V = blmmse_combiner(H, W, B, C_xq, rho)
                decided = slice_min_distance_batch(Y @ V.conj(), const)[0]
            else:
                decided = guess_digits
            errors = int(np.sum(decided != true_digits))
            out[(idx, det)] = (errors, time.perf_counter() - t0)
    return out


def run_sweep(cfg: ExperimentConfig) -> SweepReport:
    """Run the configured sweep; deterministic error counts for any worker count."""
    axis, points = cfg.sweep_points()
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_run_channel, cfg, ci) for ci in range(cfg.n_channels)]
            per_channel = [f.result() for f in futures]
    else:
        per_channel = [_run_channel(cfg, ci) for ci in range(cfg.n_channels)]

    trials = cfg.n_channels * cfg.n_symbol_vectors * cfg.n_streams
    rows = []
    for idx, (value, _, _) in enumerate(points):
        for det in cfg.detectors:
            errors = sum(res[(idx, det)][0] for res in per_channel)
            seconds = sum(res[(idx, det)][1] for res in per_channel)
            rows.append(SweepRow(param_name=axis, param_value=float(value),
                                 detector=det, errors=errors, trials=trials,
                                 ser=errors / trials, seconds=seconds))
    return SweepReport(rows=tuple(rows), seed=cfg.seed, config_digest=cfg.digest())


def to_csv_text(report: SweepReport) -> str:
    lines = [CSV_HEADER]
    for r in report.rows:
        lines.append(f"{r.param_name},{r.param_value:.9g},{r.detector},"
                     f"{r.errors},{r.trials},{r.ser:.9g},{r.seconds:.9g}")
    return "\n".join(lines) + "\n"


def write_csv(report: SweepReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(to_csv_text(report))


def csv_equal_ignoring_timing(text_a: str, text_b: str) -> bool:
    """Byte equality of two sweep CSVs with the trailing seconds field masked."""
    def strip(text):
        lines = text.rstrip("\n").split("\n")
        return [",".join(ln.split(",")[:-1]) for ln in lines]
    return strip(text_a) == strip(text_b)


# ---------------------------------------------------------------------------
# flat key = value configuration files
# ---------------------------------------------------------------------------

_LIST_FIELDS = {"rho_db", "dither_dbm", "detectors"}
_CONFIG_FIELDS = {f.name for f in fields(ExperimentConfig)}


def parse_grid(raw: str):
    """Parse 'a,b,c' lists and 'start:step:stop' inclusive grids."""
    raw = raw.strip()
    if ":" in raw:
        parts = [p.strip() for p in raw.split(":")]
        if len(parts) != 3:
            raise ParameterError(f"grid must be start:step:stop, got {raw!r}")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise ParameterError("grid step must be positive")
        n = int(np.floor((stop - start) / step + 0.5)) + 1
        return [start + i * step for i in range(max(n, 1))]
    if "," in raw:
        return [_scalar(tok) for tok in raw.split(",") if tok.strip()]
    return [_scalar(raw)]


def _scalar(tok: str):
    tok = tok.strip()
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        return tok


def parse_config_file(path) -> dict:
    """Flat `key = value` lines with # comments -> override dict."""
    overrides = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{lineno}: expected key = value")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_FIELDS:
                raise ParameterError(f"{path}:{lineno}: unknown config key {key!r}")
            overrides[key] = parse_grid(raw) if key in _LIST_FIELDS else _scalar(raw)
    return overrides


def build_config(*override_layers: dict) -> ExperimentConfig:
    """Merge override dicts (later layers win) onto the defaults."""
    merged = {}
    for layer in override_layers:
        for k, v in layer.items():
            if v is None:
                continue
            if k not in _CONFIG_FIELDS:
                raise ParameterError(f"unknown config key {k!r}")
            merged[k] = v
    return ExperimentConfig(**merged)
