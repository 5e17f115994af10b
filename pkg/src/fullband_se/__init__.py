"""48 kHz fullband speech enhancement toolkit.

Band-split two-step masking (pre-trained wideband enhancer conditioning a
highband enhancer), one-step baselines, IAM-weighted training loss, data
synthesis, and band-aware evaluation metrics.
"""

__version__ = "0.1.0"

from .audio_io import AudioBuffer, AudioFormatError, read_wav, write_wav
from .dsp import (
    StftConfig,
    WIDEBAND_16K,
    band_merge,
    band_split,
    bandlimit,
    istft,
    mel_filterbank,
    mel_mask_to_linear,
    mel_project,
    stft,
)
