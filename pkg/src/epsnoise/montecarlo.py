"""Slot-level Monte Carlo engine with reproducible chunked execution.

Work is partitioned into fixed-size slot chunks; chunk k of sweep point g
draws from default_rng(SeedSequence(seed, spawn_key=(g, k))).  Chunks are
merged strictly in index order and the stopping rule (error target or bit
cap) is evaluated on the merged counts after each chunk, so results are
bit-identical for any worker count at fixed (seed, chunk_size).
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np

from .detectors import DETECTOR_KINDS, DEFAULT_WCONFIG, GENIE_DETECTORS, WConfig
from .model import NoiseSpec, SYSTEM_NAMES, get_system, solve_noise_powers

__all__ = [
    "NoiseSetting",
    "ExperimentConfig",
    "BerEstimate",
    "estimate_ber",
    "run_sweep",
    "resolve_workers",
]

WORKERS_ENV = "EPSNOISE_WORKERS"


@dataclass(frozen=True)
class NoiseSetting:
    """Parametric noise point: resolved to mixture variances per SNR."""

    snr_db: float
    epsilon: float = 0.0
    gamma: float = 1.0
    mode: str = "background"
    tail: str = "gaussian"

    def __post_init__(self):
        # Fail fast on the same constraints solve_noise_powers enforces.
        self.resolve()

    def resolve(self) -> NoiseSpec:
        return solve_noise_powers(self.snr_db, self.epsilon, self.gamma,
                                  self.mode, self.tail)


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulation run: system, detector, noise point, and protocol."""

    system: str = "alamouti2x2"
    detector: str = "mls"
    wconfig: WConfig = DEFAULT_WCONFIG
    noise: Union[NoiseSetting, NoiseSpec] = NoiseSetting(10.0)
    genie: bool = False
    stop_errors: int = 300
    max_bits: int = 100_000_000
    seed: int = 0
    chunk_size: int = 65536
    stream_group: int = 0

    def __post_init__(self):
        if self.system not in SYSTEM_NAMES:
            raise ValueError(f"unknown system {self.system!r}, expected one of {SYSTEM_NAMES}")
        if self.detector not in DETECTOR_KINDS:
            raise ValueError(f"unknown detector {self.detector!r}, expected one of {DETECTOR_KINDS}")
        if self.detector in GENIE_DETECTORS and not self.genie:
            raise ValueError(
                f"detector {self.detector!r} needs the hidden noise-state labels; set genie=true"
            )
        if self.stop_errors < 1:
            raise ValueError(f"stop_errors must be >= 1, got {self.stop_errors}")
        if not (self.max_bits >= self.chunk_size >= 1):
            raise ValueError(
                f"max_bits >= chunk_size >= 1 violated: max_bits={self.max_bits}, "
                f"chunk_size={self.chunk_size}"
            )

    def noise_spec(self) -> NoiseSpec:
        if isinstance(self.noise, NoiseSetting):
            return self.noise.resolve()
        return self.noise


@dataclass(frozen=True)
class BerEstimate:
    bit_errors: int
    bits: int
    ber: float
    std_error: float
    slots: int
    stopped_by: str  # "errors" or "bits"


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit argument wins, then the EPSNOISE_WORKERS override, then 1.
    The worker count never changes results, only wall time."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else 1
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return workers


def _chunk_rng(seed: int, group: int, chunk: int):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(group, chunk)))


def _draw_noise(spec, states, rng, complex_values: bool):
    """Mixture noise for an array of samples whose impulse indicators are
    ``states``; draw order is fixed (gaussian block, then laplace block) so
    streams replay identically."""
    shape = states.shape
    if spec.tail == "pure_laplace":
        b = math.sqrt(spec.sigma1_sq / 2.0)
        if complex_values:
            return rng.laplace(0.0, b, shape) + 1j * rng.laplace(0.0, b, shape)
        return rng.laplace(0.0, b, shape)
    if complex_values:
        zg = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    else:
        zg = rng.standard_normal(shape)
    if spec.tail == "gaussian":
        sd = np.where(states, math.sqrt(spec.sigma2_sq), math.sqrt(spec.sigma1_sq))
        return zg * sd
    # Gaussian background with Laplace impulse tail.
    b2 = math.sqrt(spec.sigma2_sq / 2.0)
    if complex_values:
        zl = rng.laplace(0.0, b2, shape) + 1j * rng.laplace(0.0, b2, shape)
    else:
        zl = rng.laplace(0.0, b2, shape)
    return np.where(states, zl, zg * math.sqrt(spec.sigma1_sq))


def _w_batch_scores(mags, cfg: WConfig):
    """Vectorized twin of detectors.w_weights over (..., n_samples) magnitude
    arrays; returns the converged weighted means.  Kept step-for-step aligned
    with the scalar routine (checked by the test suite)."""
    mags = np.asarray(mags, dtype=float)
    denom = 0.5 * (mags.min(axis=-1) + mags.max(axis=-1)) * cfg.p2
    w = np.ones_like(mags)
    active = denom != 0.0
    safe = np.where(active, denom, 1.0)
    corrected = cfg.biweight_convention == "corrected"
    for _ in range(cfg.max_iterations):
        if not active.any():
            break
        m = (w * mags).sum(axis=-1) / w.sum(axis=-1)
        u = (mags - m[..., None]) / safe[..., None]
        base = (1.0 - u * u) ** 2
        if corrected:
            w_new = np.where(np.abs(u) <= 1.0, base, 0.0)
        else:
            w_new = np.where(np.abs(u) > 1.0, base, 0.0)
        any_nonzero = (w_new != 0.0).any(axis=-1)
        fallback = active & ~any_nonzero
        apply = active & any_nonzero
        delta = np.abs(w_new - w).max(axis=-1)
        w = np.where(apply[..., None], w_new, w)
        w = np.where(fallback[..., None], 1.0, w)
        active = apply & (delta >= cfg.weight_change_tol)
    return (w * mags).sum(axis=-1) / w.sum(axis=-1)


def _batch_decide(detector: str, res, states, spec, wcfg: WConfig):
    """Candidate indices for a (slots, candidates, samples) residual tensor."""
    mags = np.abs(res)
    if detector == "mls":
        metric = (mags ** 2).sum(axis=-1)
    elif detector == "median":
        metric = np.median(mags, axis=-1)
    elif detector == "w":
        metric = _w_batch_scores(mags, wcfg)
    elif detector == "ml_genie":
        var = np.where(states, spec.sigma2_sq, spec.sigma1_sq)
        metric = ((mags ** 2) / var[:, None, :]).sum(axis=-1)
    elif detector == "mlbnr_genie":
        keep = ~states
        m_all = (mags ** 2).sum(axis=-1)
        m_bg = ((mags ** 2) * keep[:, None, :]).sum(axis=-1)
        metric = np.where(keep.any(axis=-1)[:, None], m_bg, m_all)
    else:
        raise ValueError(f"unknown detector {detector!r}")
    return metric.argmin(axis=1)


def _alamouti_chunk(spec, detector, wcfg, n, rng):
    """Simulate n Alamouti slots; returns (bit_errors, bits)."""
    sys = get_system("alamouti2x2")
    s1c = np.array([c.s1 for c in sys.candidates])
    s2c = np.array([c.s2 for c in sys.candidates])
    bits = np.array(sys.bits)

    re = rng.standard_normal((n, 4))
    im = rng.standard_normal((n, 4))
    h = (re + 1j * im) * math.sqrt(0.5)  # columns h11, h12, h21, h22
    h11, h12, h21, h22 = h[:, 0], h[:, 1], h[:, 2], h[:, 3]

    idx = rng.integers(0, len(sys.candidates), size=n)
    states = rng.random((n, 4)) < spec.epsilon
    noise = _draw_noise(spec, states, rng, complex_values=True)

    preds = np.empty((n, 4, 4), dtype=complex)
    for c in range(4):
        preds[:, c, 0] = s1c[c] * h11 - s2c[c] * h21
        preds[:, c, 1] = s1c[c] * h12 - s2c[c] * h22
        preds[:, c, 2] = s2c[c] * h11 + s1c[c] * h21
        preds[:, c, 3] = s2c[c] * h12 + s1c[c] * h22

    obs = preds[np.arange(n), idx, :] + noise
    decided = _batch_decide(detector, obs[:, None, :] - preds, states, spec, wcfg)
    bit_errors = int((bits[idx] != bits[decided]).sum())
    return bit_errors, 2 * n


def _repcode_chunk(spec, detector, wcfg, n, rng):
    """Simulate n fixed-gain triple-repetition codewords (real noise)."""
    sys = get_system("repcode3")
    codewords = np.array(sys.candidates, dtype=float)  # (2, 3)

    idx = rng.integers(0, len(sys.candidates), size=n)
    states = rng.random((n, 3)) < spec.epsilon
    noise = _draw_noise(spec, states, rng, complex_values=False)

    obs = codewords[idx] + noise
    decided = _batch_decide(detector, obs[:, None, :] - codewords[None, :, :],
                            states, spec, wcfg)
    bit_errors = int((idx != decided).sum())
    return bit_errors, n


def _chunk_counts(cfg: ExperimentConfig, chunk_index: int):
    rng = _chunk_rng(cfg.seed, cfg.stream_group, chunk_index)
    spec = cfg.noise_spec()
    if cfg.system == "alamouti2x2":
        return _alamouti_chunk(spec, cfg.detector, cfg.wconfig, cfg.chunk_size, rng)
    return _repcode_chunk(spec, cfg.detector, cfg.wconfig, cfg.chunk_size, rng)


def _bits_per_slot(system: str) -> int:
    sys = get_system(system)
    return sys.bits_per_candidate


def estimate_ber(cfg: ExperimentConfig, workers: Optional[int] = None) -> BerEstimate:
    """Simulate until the error target or the bit cap is reached.

    The stop condition is checked on merged counts at chunk granularity, so
    the exact stopping slot is chunk-aligned; identical (seed, chunk_size)
    give identical results for any worker count.
    """
    workers = resolve_workers(workers)
    bits_per_chunk = cfg.chunk_size * _bits_per_slot(cfg.system)
    max_chunks = max(1, math.ceil(cfg.max_bits / bits_per_chunk))

    bit_errors = 0
    bits = 0
    chunks_used = 0
    stopped_by = None

    def merge(counts) -> bool:
        nonlocal bit_errors, bits, chunks_used, stopped_by
        e, b = counts
        bit_errors += e
        bits += b
        chunks_used += 1
        if bit_errors >= cfg.stop_errors:
            stopped_by = "errors"
        elif bits >= cfg.max_bits:
            stopped_by = "bits"
        return stopped_by is not None

    if workers == 1:
        for k in range(max_chunks):
            if merge(_chunk_counts(cfg, k)):
                break
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            k = 0
            done = False
            while not done and k < max_chunks:
                wave = range(k, min(k + workers, max_chunks))
                for counts in pool.map(_chunk_counts, [cfg] * len(wave), wave):
                    # Later results of a stopped wave are discarded unmerged.
                    if merge(counts):
                        done = True
                        break
                k = wave.stop
    if stopped_by is None:
        # max_chunks covers max_bits, so the cap always fires on the last chunk.
        stopped_by = "bits"

    ber = bit_errors / bits if bits else 0.0
    std_error = math.sqrt(ber * (1.0 - ber) / bits) if bits else 0.0
    return BerEstimate(
        bit_errors=bit_errors,
        bits=bits,
        ber=ber,
        std_error=std_error,
        slots=chunks_used * cfg.chunk_size,
        stopped_by=stopped_by,
    )


def run_sweep(base: ExperimentConfig, snr_grid: Sequence[float],
              workers: Optional[int] = None):
    """One estimate per SNR point, in grid order.

    Point p reuses the base configuration with the grid SNR and stream group
    p, so every point draws from an independent, reproducible stream family.
    """
    if len(snr_grid) == 0:
        raise ValueError("snr_grid must be non-empty")
    if not isinstance(base.noise, NoiseSetting):
        raise ValueError("run_sweep needs a parametric NoiseSetting to rescale per SNR")
    results = []
    for p, snr in enumerate(snr_grid):
        cfg = replace(base, noise=replace(base.noise, snr_db=float(snr)), stream_group=p)
        results.append((float(snr), estimate_ber(cfg, workers)))
    return results
