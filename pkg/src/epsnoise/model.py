"""Noise, channel, and slot model for 2Tx2Rx Alamouti signaling, plus the
generic candidate-system abstraction shared by the detectors and the
simulator.

Noise is a two-component mixture: with probability 1-epsilon a sample comes
from the background component (Gaussian, per-dimension variance sigma1_sq),
with probability epsilon from the impulse component (Gaussian or Laplace,
per-dimension variance sigma2_sq).  A complex sample draws its component once
and applies it to both the real and the imaginary part.

All samplers are deterministic functions of an explicit numpy Generator; use
independent generators for concurrent work.  The engine derives generator k
of master seed s as default_rng(SeedSequence(s, spawn_key=(group, k))).
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "BACKGROUND",
    "IMPULSE",
    "TAILS",
    "NoiseSpec",
    "NoiseSample",
    "ChannelRealization",
    "SymbolPair",
    "ReceivedSlot",
    "SlotObservation",
    "SignalSystem",
    "solve_noise_powers",
    "sample_noise",
    "sample_noise_real",
    "sample_channel",
    "transmit_slot",
    "residuals",
    "alamouti_predict",
    "repcode_predict",
    "alamouti2x2",
    "repcode3",
    "get_system",
    "SYSTEM_NAMES",
]

BACKGROUND = "background"
IMPULSE = "impulse"
TAILS = ("gaussian", "laplace", "pure_laplace")


@dataclass(frozen=True)
class NoiseSpec:
    """Mixture-noise parameters.

    ``sigma1_sq`` and ``sigma2_sq`` are per-real-dimension variances.  For the
    ``pure_laplace`` tail the whole process is a single Laplace component with
    per-dimension variance ``sigma1_sq``; ``epsilon`` and ``sigma2_sq`` are
    normalised away.
    """

    epsilon: float
    sigma1_sq: float
    sigma2_sq: float
    tail: str = "gaussian"

    def __post_init__(self):
        if self.tail not in TAILS:
            raise ValueError(f"unknown tail {self.tail!r}, expected one of {TAILS}")
        if not (0.0 <= self.epsilon <= 1.0):
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if not (self.sigma1_sq > 0.0):
            raise ValueError(f"sigma1_sq must be > 0, got {self.sigma1_sq}")
        if self.tail == "pure_laplace":
            object.__setattr__(self, "epsilon", 0.0)
            object.__setattr__(self, "sigma2_sq", self.sigma1_sq)
        elif not (self.sigma2_sq >= self.sigma1_sq):
            raise ValueError(
                f"sigma2_sq >= sigma1_sq violated (impulse-to-background ratio gamma must be >= 1): "
                f"sigma1_sq={self.sigma1_sq}, sigma2_sq={self.sigma2_sq}"
            )

    @property
    def gamma(self) -> float:
        """Impulse-to-background variance ratio."""
        return self.sigma2_sq / self.sigma1_sq


@dataclass(frozen=True)
class NoiseSample:
    value: complex
    state: str  # BACKGROUND or IMPULSE


@dataclass(frozen=True)
class ChannelRealization:
    """The four complex gains of one quasi-static slot."""

    h11: complex
    h12: complex
    h21: complex
    h22: complex

    def __post_init__(self):
        for g in (self.h11, self.h12, self.h21, self.h22):
            if not (math.isfinite(g.real) and math.isfinite(g.imag)):
                raise ValueError("channel gains must be finite")

    @property
    def gains(self) -> np.ndarray:
        """Gains in (h11, h12, h21, h22) order."""
        return np.array([self.h11, self.h12, self.h21, self.h22])

    @property
    def energy(self) -> float:
        """Total channel energy |h11|^2 + |h12|^2 + |h21|^2 + |h22|^2."""
        return float(np.sum(np.abs(self.gains) ** 2))


@dataclass(frozen=True)
class SymbolPair:
    """One BPSK pair (s1, s2), each symbol +1 or -1."""

    s1: int
    s2: int

    def __post_init__(self):
        if self.s1 not in (-1, 1) or self.s2 not in (-1, 1):
            raise ValueError(f"symbols must be +1 or -1, got ({self.s1}, {self.s2})")


@dataclass(frozen=True)
class ReceivedSlot:
    """The four received statistics of one Alamouti slot.

    Sample order is (r11, r21, r12, r22): receive antenna j, epoch i in
    r_{ji}.  ``states`` are the hidden per-sample noise-component labels,
    consumed only by the genie detectors.
    """

    r11: complex
    r21: complex
    r12: complex
    r22: complex
    states: tuple

    def __post_init__(self):
        if len(self.states) != 4:
            raise ValueError("a slot carries exactly four noise-state labels")

    @property
    def observations(self) -> np.ndarray:
        return np.array([self.r11, self.r21, self.r12, self.r22])


@dataclass(frozen=True)
class SlotObservation:
    """Generic observed vector for non-Alamouti systems (e.g. the
    triple-repetition example)."""

    values: tuple
    states: Optional[tuple] = None

    @property
    def observations(self) -> np.ndarray:
        return np.asarray(self.values)


def solve_noise_powers(snr_db: float, epsilon: float, gamma: float,
                       mode: str = "background", tail: str = "gaussian") -> NoiseSpec:
    """Translate an SNR point into mixture variances for unit symbol energy.

    mode="background": N0 = 2*sigma1_sq = 10^(-snr_db/10), impulse variance
    gamma times larger.  mode="total": the full mixture power
    2*((1-eps)*sigma1_sq + eps*sigma2_sq) equals 10^(-snr_db/10).
    """
    if not (gamma >= 1.0):
        raise ValueError(
            f"gamma = {gamma} violates sigma2_sq >= sigma1_sq (gamma must be >= 1)"
        )
    if mode not in ("background", "total"):
        raise ValueError(f"unknown snr mode {mode!r}, expected 'background' or 'total'")
    n0 = 10.0 ** (-snr_db / 10.0)
    if tail == "pure_laplace":
        s1 = n0 / 2.0
        return NoiseSpec(0.0, s1, s1, tail)
    if mode == "background":
        s1 = n0 / 2.0
    else:
        s1 = n0 / (2.0 * ((1.0 - epsilon) + epsilon * gamma))
    return NoiseSpec(epsilon, s1, gamma * s1, tail)


def _draw_value(spec, state: str, rng, size: int) -> np.ndarray:
    """``size`` independent real noise values for one mixture component."""
    if spec.tail == "pure_laplace":
        return rng.laplace(0.0, math.sqrt(spec.sigma1_sq / 2.0), size)
    if state == IMPULSE:
        if spec.tail == "laplace":
            return rng.laplace(0.0, math.sqrt(spec.sigma2_sq / 2.0), size)
        return rng.standard_normal(size) * math.sqrt(spec.sigma2_sq)
    return rng.standard_normal(size) * math.sqrt(spec.sigma1_sq)


def sample_noise(spec, rng) -> NoiseSample:
    """One complex mixture sample: the component is drawn once and shared by
    the real and imaginary parts, each with the component's per-dimension
    variance."""
    state = IMPULSE if rng.random() < spec.epsilon else BACKGROUND
    re, im = _draw_value(spec, state, rng, 2)
    return NoiseSample(complex(re, im), state)


def sample_noise_real(spec, rng) -> NoiseSample:
    """One real mixture sample (used by fixed-gain systems such as the
    triple-repetition example)."""
    state = IMPULSE if rng.random() < spec.epsilon else BACKGROUND
    value = _draw_value(spec, state, rng, 1)[0]
    return NoiseSample(complex(value, 0.0), state)


def sample_channel(rng) -> ChannelRealization:
    """One Rayleigh slot: four i.i.d. complex Gaussian gains with
    per-dimension variance 1/2 (unit mean-square gain)."""
    re = rng.standard_normal(4)
    im = rng.standard_normal(4)
    g = (re + 1j * im) * math.sqrt(0.5)
    return ChannelRealization(g[0], g[1], g[2], g[3])


def alamouti_predict(pair: SymbolPair, ch: ChannelRealization) -> np.ndarray:
    """Noiseless received statistics for one candidate pair, in slot order
    (r11, r21, r12, r22)."""
    s1, s2 = pair.s1, pair.s2
    return np.array([
        s1 * ch.h11 - s2 * ch.h21,
        s1 * ch.h12 - s2 * ch.h22,
        s2 * ch.h11 + s1 * ch.h21,
        s2 * ch.h12 + s1 * ch.h22,
    ])


def repcode_predict(codeword, ch=None) -> np.ndarray:
    """Noiseless observations for a fixed-gain repetition codeword."""
    return np.asarray(codeword, dtype=float)


def transmit_slot(pair: SymbolPair, ch: ChannelRealization, spec, rng) -> ReceivedSlot:
    """Transmit one pair over one slot: prediction plus four independent
    mixture samples, drawn in slot order, with their component labels kept."""
    x = alamouti_predict(pair, ch)
    samples = [sample_noise(spec, rng) for _ in range(4)]
    r = x + np.array([s.value for s in samples])
    return ReceivedSlot(r[0], r[1], r[2], r[3], tuple(s.state for s in samples))


def residuals(slot, ch: ChannelRealization, candidate: SymbolPair) -> np.ndarray:
    """Per-sample residuals of one candidate; equals the injected noise when
    the candidate is the transmitted pair."""
    return slot.observations - alamouti_predict(candidate, ch)


@dataclass(frozen=True)
class SignalSystem:
    """A finite candidate set with its observation model.

    ``predict(candidate, channel)`` returns the noiseless observation vector;
    ``bits`` holds the bit labels parallel to ``candidates``.
    """

    name: str
    candidates: tuple
    bits: tuple
    predict: Callable
    draw_channel: Callable
    complex_noise: bool
    observation_len: int

    @property
    def bits_per_candidate(self) -> int:
        return len(self.bits[0])


def _no_channel(rng):
    return None


_ALAMOUTI = SignalSystem(
    name="alamouti2x2",
    candidates=(SymbolPair(1, 1), SymbolPair(1, -1), SymbolPair(-1, 1), SymbolPair(-1, -1)),
    bits=((1, 1), (1, 0), (0, 1), (0, 0)),
    predict=alamouti_predict,
    draw_channel=sample_channel,
    complex_noise=True,
    observation_len=4,
)

_REPCODE3 = SignalSystem(
    name="repcode3",
    candidates=((1, 1, 1), (-1, -1, -1)),
    bits=((1,), (0,)),
    predict=repcode_predict,
    draw_channel=_no_channel,
    complex_noise=False,
    observation_len=3,
)

SYSTEM_NAMES = ("alamouti2x2", "repcode3")


def alamouti2x2() -> SignalSystem:
    return _ALAMOUTI


def repcode3() -> SignalSystem:
    return _REPCODE3


def get_system(name: str) -> SignalSystem:
    if name == "alamouti2x2":
        return _ALAMOUTI
    if name == "repcode3":
        return _REPCODE3
    raise ValueError(f"unknown system {name!r}, expected one of {SYSTEM_NAMES}")
