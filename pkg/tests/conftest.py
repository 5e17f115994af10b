import numpy as np
import pytest

from fullband_se import AudioBuffer


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)


def tone(freq_hz, seconds, sr=48000, amp=1.0, phase=0.0):
    t = np.arange(int(round(seconds * sr))) / sr
    return AudioBuffer(amp * np.sin(2 * np.pi * freq_hz * t + phase), sr)


def white(rng, seconds, sr=48000, amp=0.1):
    return AudioBuffer(amp * rng.standard_normal(int(round(seconds * sr))), sr)


def interior_rel_err(ref, out, guard):
    """Max relative error on samples [guard, len-guard), normalized by peak."""
    ref = np.asarray(ref)
    out = np.asarray(out)[: len(ref)]
    lo, hi = guard, len(ref) - guard
    scale = np.max(np.abs(ref[lo:hi]))
    return np.max(np.abs(out[lo:hi] - ref[lo:hi])) / scale
