"""Mono WAV I/O: PCM 16-bit and IEEE float 32-bit, 16 kHz or 48 kHz."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

SUPPORTED_RATES = (16000, 48000)

_FMT_PCM = 1
_FMT_IEEE_FLOAT = 3


class AudioFormatError(Exception):
    """Raised for WAV layouts this toolkit does not handle."""


@dataclass
class AudioBuffer:
    """Mono time-domain samples with a declared sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise AudioFormatError(f"expected mono 1-D samples, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise AudioFormatError("non-finite samples")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def read_wav(path) -> AudioBuffer:
    """Read a mono 16-bit PCM or 32-bit float WAV at a supported rate."""
    with open(path, "rb") as fh:
        riff, _size, wave_id = struct.unpack("<4sI4s", fh.read(12))
        if riff != b"RIFF" or wave_id != b"WAVE":
            raise AudioFormatError(f"{path}: not a RIFF/WAVE file")

        fmt = None
        data = None
        while True:
            head = fh.read(8)
            if len(head) < 8:
                break
            chunk_id, chunk_size = struct.unpack("<4sI", head)
            payload = fh.read(chunk_size)
            if chunk_size % 2:  # chunks are word-aligned
                fh.read(1)
            if chunk_id == b"fmt ":
                fmt = struct.unpack("<HHIIHH", payload[:16])
            elif chunk_id == b"data":
                data = payload

        if fmt is None or data is None:
            raise AudioFormatError(f"{path}: missing fmt or data chunk")
        tag, channels, rate, _byte_rate, _block_align, bits = fmt
        if channels != 1:
            raise AudioFormatError(f"{path}: {channels} channels, only mono supported")
        if rate not in SUPPORTED_RATES:
            raise AudioFormatError(f"{path}: sample rate {rate}, expected one of {SUPPORTED_RATES}")

        if tag == _FMT_PCM and bits == 16:
            samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
        elif tag == _FMT_IEEE_FLOAT and bits == 32:
            samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
        else:
            raise AudioFormatError(f"{path}: format tag {tag} / {bits} bits unsupported")
    return AudioBuffer(samples, rate)


def write_wav(path, audio: AudioBuffer, encoding: str = "float32"):
    """Write mono WAV. encoding: 'float32' (IEEE) or 'pcm16'."""
    if audio.sample_rate not in SUPPORTED_RATES:
        raise AudioFormatError(f"sample rate {audio.sample_rate} not in {SUPPORTED_RATES}")
    if encoding == "float32":
        payload = audio.samples.astype("<f4").tobytes()
        tag, bits = _FMT_IEEE_FLOAT, 32
    elif encoding == "pcm16":
        quantized = np.clip(np.round(audio.samples * 32768.0), -32768, 32767)
        payload = quantized.astype("<i2").tobytes()
        tag, bits = _FMT_PCM, 16
    else:
        raise ValueError(f"unknown encoding {encoding!r}")

    block_align = bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, tag, 1, audio.sample_rate,
        audio.sample_rate * block_align, block_align, bits,
        b"data", len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        if len(payload) % 2:
            fh.write(b"\x00")
