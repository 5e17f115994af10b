"""Deterministic signal-processing kernels.

Spectrograms are plain complex128 arrays indexed (frame, bin); magnitudes are
float64 arrays of the same layout. All functions here are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .audio_io import AudioBuffer

FULLBAND_BINS = 769
WIDEBAND_BINS = 257   # bins 0..256, 0-8 kHz inclusive
HIGHBAND_BINS = 512   # bins 257..768, 8-24 kHz
MEL_RESOLUTIONS = (48, 64, 80)


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis grid: 1536-point FFT, 480-sample hop at 48 kHz."""

    fft_size: int = 1536
    hop: int = 480
    sample_rate: int = 48000
    window: str = "hann"

    def __post_init__(self):
        if not self.fft_size > self.hop > 0:
            raise ValueError(f"need fft_size > hop > 0, got {self.fft_size}/{self.hop}")
        if self.window != "hann":
            raise ValueError(f"unknown window {self.window!r}")

    @property
    def bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def bin_hz(self) -> float:
        return self.sample_rate / self.fft_size


# 16 kHz grid with the same 31.25 Hz bin spacing and 10 ms hop as the
# fullband default; its 257 bins coincide with the fullband wideband part.
WIDEBAND_16K = StftConfig(fft_size=512, hop=160, sample_rate=16000)


@lru_cache(maxsize=8)
def _window(fft_size: int) -> np.ndarray:
    n = np.arange(fft_size)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / fft_size)  # periodic Hann


def frame_count(n_samples: int, hop: int) -> int:
    return -(-n_samples // hop)


def stft(audio: AudioBuffer, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Windowed forward transform; right-pads with zeros to a whole frame count.

    Returns complex array of shape (ceil(len/hop), fft_size/2 + 1).
    """
    if audio.sample_rate != cfg.sample_rate:
        raise ValueError(f"sample rate {audio.sample_rate} != config {cfg.sample_rate}")
    x = audio.samples
    if len(x) < 1:
        raise ValueError("empty input")
    frames = frame_count(len(x), cfg.hop)
    padded_len = (frames - 1) * cfg.hop + cfg.fft_size
    padded = np.zeros(padded_len)
    padded[: len(x)] = x
    offsets = np.arange(frames) * cfg.hop
    segs = padded[offsets[:, None] + np.arange(cfg.fft_size)[None, :]]
    return np.fft.rfft(segs * _window(cfg.fft_size)[None, :], axis=1)


def _ola_norm(frames: int, cfg: StftConfig) -> np.ndarray:
    # Summed squared window; analysis and synthesis share the same Hann.
    n = (frames - 1) * cfg.hop + cfg.fft_size
    w2 = _window(cfg.fft_size) ** 2
    acc = np.zeros(n)
    for t in range(frames):
        acc[t * cfg.hop : t * cfg.hop + cfg.fft_size] += w2
    return acc


def istft(spec: np.ndarray, cfg: StftConfig = StftConfig()) -> AudioBuffer:
    """Weighted overlap-add inverse; exact round-trip of stft() away from edges.

    Output length is the padded analysis length; callers truncate to taste.
    """
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[1] != cfg.bins:
        raise ValueError(f"expected (frames, {cfg.bins}) spectrogram, got {spec.shape}")
    frames = spec.shape[0]
    segs = np.fft.irfft(spec, n=cfg.fft_size, axis=1) * _window(cfg.fft_size)[None, :]
    out = np.zeros((frames - 1) * cfg.hop + cfg.fft_size)
    for t in range(frames):
        out[t * cfg.hop : t * cfg.hop + cfg.fft_size] += segs[t]
    norm = _ola_norm(frames, cfg)
    np.divide(out, norm, out=out, where=norm > 1e-12)
    return AudioBuffer(out, cfg.sample_rate)


def band_split(spec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """769 bins -> (257-bin wideband, 512-bin highband); bin 256 (8 kHz) goes low."""
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[1] != FULLBAND_BINS:
        raise ValueError(f"expected {FULLBAND_BINS} bins, got {spec.shape}")
    return spec[:, :WIDEBAND_BINS].copy(), spec[:, WIDEBAND_BINS:].copy()


def band_merge(wideband: np.ndarray, highband: np.ndarray) -> np.ndarray:
    """Exact inverse of band_split."""
    wideband = np.asarray(wideband)
    highband = np.asarray(highband)
    if wideband.ndim != 2 or wideband.shape[1] != WIDEBAND_BINS:
        raise ValueError(f"wideband must have {WIDEBAND_BINS} bins, got {wideband.shape}")
    if highband.ndim != 2 or highband.shape[1] != HIGHBAND_BINS:
        raise ValueError(f"highband must have {HIGHBAND_BINS} bins, got {highband.shape}")
    if wideband.shape[0] != highband.shape[0]:
        raise ValueError(f"frame counts differ: {wideband.shape[0]} vs {highband.shape[0]}")
    return np.concatenate([wideband, highband], axis=1)


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular mel filters on the 769-bin linear grid, HTK scale, 0-24 kHz.

    The first and last filters are clamped flat at the band edges so every
    linear bin receives positive weight (required for mask expansion).
    """

    n_mels: int
    weights: np.ndarray = field(compare=False)

    def __post_init__(self):
        if self.weights.shape != (self.n_mels, FULLBAND_BINS):
            raise ValueError(f"weights shape {self.weights.shape}")


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, cfg: StftConfig = StftConfig()) -> MelFilterbank:
    if n_mels < 2:
        raise ValueError("need at least 2 mel bands")
    f_max = cfg.sample_rate / 2.0
    edges_hz = _mel_to_hz(np.linspace(_hz_to_mel(0.0), _hz_to_mel(f_max), n_mels + 2))
    bin_hz = np.arange(cfg.bins) * cfg.bin_hz
    weights = np.zeros((n_mels, cfg.bins))
    for m in range(n_mels):
        lo, mid, hi = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        rising = (bin_hz - lo) / (mid - lo)
        falling = (hi - bin_hz) / (hi - mid)
        if m == 0:
            rising = np.ones_like(rising)  # clamp: cover down to 0 Hz
        if m == n_mels - 1:
            falling = np.ones_like(falling)  # clamp: cover up to Nyquist
        weights[m] = np.clip(np.minimum(rising, falling), 0.0, 1.0)
    return MelFilterbank(n_mels, weights)


def mel_project(mag: np.ndarray, fb: MelFilterbank) -> np.ndarray:
    """Project (frames, 769) magnitudes to (frames, n_mels)."""
    mag = np.asarray(mag)
    if mag.ndim != 2 or mag.shape[1] != fb.weights.shape[1]:
        raise ValueError(f"magnitude shape {mag.shape} vs filterbank {fb.weights.shape}")
    return mag @ fb.weights.T


def mel_mask_to_linear(mel_mask: np.ndarray, fb: MelFilterbank) -> np.ndarray:
    """Expand a (frames, n_mels) mask to (frames, 769) by weight-normalized
    interpolation; constants map to the same constants."""
    mel_mask = np.asarray(mel_mask)
    if mel_mask.ndim != 2 or mel_mask.shape[1] != fb.n_mels:
        raise ValueError(f"mask shape {mel_mask.shape} vs n_mels {fb.n_mels}")
    col_sum = fb.weights.sum(axis=0)
    if np.any(col_sum <= 0):
        raise ValueError("filterbank leaves bins uncovered")
    return (mel_mask @ fb.weights) / col_sum[None, :]


def bandlimit(audio: AudioBuffer, band: str, cfg: StftConfig = StftConfig()) -> AudioBuffer:
    """STFT-domain brickwall: 'low' keeps 0-8 kHz (bins 0..256), 'high' the rest.

    Phase-exact and bit-reproducible; output length equals input length.
    """
    if audio.sample_rate != cfg.sample_rate:
        raise ValueError(f"bandlimit expects {cfg.sample_rate} Hz input")
    if band not in ("low", "high"):
        raise ValueError(f"band must be 'low' or 'high', got {band!r}")
    spec = stft(audio, cfg)
    if band == "low":
        spec[:, WIDEBAND_BINS:] = 0.0
    else:
        spec[:, :WIDEBAND_BINS] = 0.0
    out = istft(spec, cfg)
    return AudioBuffer(out.samples[: len(audio)], cfg.sample_rate)
