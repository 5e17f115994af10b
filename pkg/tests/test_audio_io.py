import struct

import numpy as np
import pytest

from fullband_se import AudioBuffer, AudioFormatError, read_wav, write_wav


class TestRoundTrip:
    def test_float32(self, tmp_path, rng):
        x = rng.uniform(-0.9, 0.9, 4800)
        path = tmp_path / "f.wav"
        write_wav(path, AudioBuffer(x, 48000), encoding="float32")
        back = read_wav(path)
        assert back.sample_rate == 48000
        assert np.allclose(back.samples, x, atol=1e-7)

    def test_pcm16(self, tmp_path, rng):
        x = rng.uniform(-0.9, 0.9, 1600)
        path = tmp_path / "p.wav"
        write_wav(path, AudioBuffer(x, 16000), encoding="pcm16")
        back = read_wav(path)
        assert back.sample_rate == 16000
        assert np.max(np.abs(back.samples - x)) <= 0.5 / 32768

    def test_float32_write_is_byte_stable(self, tmp_path, rng):
        x = rng.standard_normal(1000) * 0.1
        a, b = tmp_path / "a.wav", tmp_path / "b.wav"
        write_wav(a, AudioBuffer(x, 48000))
        write_wav(b, AudioBuffer(x, 48000))
        assert a.read_bytes() == b.read_bytes()


class TestRejections:
    def test_rejects_stereo(self, tmp_path):
        payload = np.zeros(64, dtype="<i2").tobytes()
        header = struct.pack(
            "<4sI4s4sIHHIIHH4sI", b"RIFF", 36 + len(payload), b"WAVE",
            b"fmt ", 16, 1, 2, 48000, 48000 * 4, 4, 16, b"data", len(payload))
        p = tmp_path / "stereo.wav"
        p.write_bytes(header + payload)
        with pytest.raises(AudioFormatError, match="channels"):
            read_wav(p)

    def test_rejects_unsupported_rate(self, tmp_path, rng):
        with pytest.raises(AudioFormatError, match="sample rate"):
            write_wav(tmp_path / "x.wav", AudioBuffer(rng.standard_normal(100), 44100))

    def test_rejects_24bit(self, tmp_path):
        payload = b"\x00" * 96
        header = struct.pack(
            "<4sI4s4sIHHIIHH4sI", b"RIFF", 36 + len(payload), b"WAVE",
            b"fmt ", 16, 1, 1, 48000, 48000 * 3, 3, 24, b"data", len(payload))
        p = tmp_path / "deep.wav"
        p.write_bytes(header + payload)
        with pytest.raises(AudioFormatError, match="unsupported"):
            read_wav(p)

    def test_rejects_non_riff(self, tmp_path):
        p = tmp_path / "junk.wav"
        p.write_bytes(b"OggS" + b"\x00" * 100)
        with pytest.raises(AudioFormatError):
            read_wav(p)

    def test_rejects_nonfinite_samples(self):
        with pytest.raises(AudioFormatError, match="finite"):
            AudioBuffer(np.array([0.0, np.nan]), 48000)

    def test_rejects_stereo_array(self, rng):
        with pytest.raises(AudioFormatError, match="mono"):
            AudioBuffer(rng.standard_normal((100, 2)), 48000)
