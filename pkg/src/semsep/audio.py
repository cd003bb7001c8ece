"""Waveform container and PCM16 WAV round-trip helpers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile

DEFAULT_SAMPLE_RATE = 16000
PCM16_SCALE = 32767.0


class ShapeError(ValueError):
    """Signal geometry mismatch (lengths, rates, frame layouts)."""


@dataclass(eq=False)
class AudioClip:
    """Fixed-rate mono waveform; samples are float64 and treated as immutable."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ShapeError(f"expected mono 1-D samples, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples contain non-finite values")

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples ** 2)))

    def peak(self) -> float:
        return float(np.max(np.abs(self.samples))) if self.num_samples else 0.0


def write_wav(path, clip: AudioClip) -> None:
    """Write PCM16 little-endian mono WAV."""
    q = np.clip(np.round(clip.samples * PCM16_SCALE), -32768, 32767).astype(np.int16)
    wavfile.write(path, clip.sample_rate, q)


def read_wav(path) -> AudioClip:
    rate, data = wavfile.read(path)
    if data.dtype != np.int16:
        raise ValueError(f"expected PCM16 WAV, got dtype {data.dtype}")
    if data.ndim != 1:
        raise ShapeError("expected mono WAV")
    return AudioClip(samples=data.astype(np.float64) / PCM16_SCALE, sample_rate=int(rate))
