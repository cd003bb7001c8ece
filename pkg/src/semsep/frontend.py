"""Analysis/synthesis bases for the separator and the mel-patch frontend.

Two bases share one frame geometry (5 ms window, 2.5 ms hop at 16 kHz):

* ``stft``: magnitude of an 80-sample Hann-windowed frame zero-padded to a
  128-point FFT (65 nonnegative coefficients); synthesis reuses the
  analysis phase, applies a synthesis Hann window and renormalizes the
  overlap-add by the summed squared window.
* ``learned``: a rectified linear map of the 80-sample frames into 256
  channels; synthesis is the transposed map plus plain overlap-add.

The classifier frontend turns a clip into 64-channel log-mel frames
(25 ms window, 10 ms hop, centered with reflection padding) and a
64x96 patch per frame (edge-padded so patch count equals frame count).

Tensor variants of the framing/STFT steps carry gradients for training;
their adjoints are pinned by finite-difference tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from semsep import autodiff as ad
from semsep.audio import AudioClip, ShapeError
from semsep.errors import ConfigurationError

MEL_CHANNELS = 64
MEL_WINDOW = 400
MEL_HOP = 160
MEL_FFT = 1024
MEL_FMIN = 125.0
MEL_FMAX = 7500.0
PATCH_FRAMES = 96
MEL_LOG_FLOOR = 1e-5

_OLA_EPS = 1e-8


@dataclass(frozen=True)
class BasisConfig:
    kind: str = "stft"
    window_ms: float = 5.0
    hop_ms: float = 2.5
    num_coeffs: int = 65
    fft_size: int = 128

    def __post_init__(self):
        if self.kind not in ("stft", "learned"):
            raise ConfigurationError(f"unknown basis kind {self.kind!r}")
        if self.hop_ms > self.window_ms:
            raise ConfigurationError("hop must not exceed window")
        if self.kind == "stft" and self.num_coeffs != self.fft_size // 2 + 1:
            raise ConfigurationError("stft num_coeffs must equal fft_size/2 + 1")

    def window_samples(self, sample_rate):
        return round(sample_rate * self.window_ms / 1000.0)

    def hop_samples(self, sample_rate):
        return round(sample_rate * self.hop_ms / 1000.0)


def learned_basis_config():
    return BasisConfig(kind="learned", num_coeffs=256)


@dataclass(frozen=True)
class FrameGeometry:
    num_samples: int
    window: int
    hop: int

    def __post_init__(self):
        if self.num_samples < self.window:
            raise ShapeError(
                f"signal ({self.num_samples}) shorter than one window ({self.window})")

    @property
    def num_frames(self):
        return 1 + (self.num_samples - self.window) // self.hop

    @property
    def coverage(self):
        return self.window + self.hop * (self.num_frames - 1)


def geometry_for(clip_or_length, config: BasisConfig, sample_rate=None) -> FrameGeometry:
    if isinstance(clip_or_length, AudioClip):
        length, sample_rate = clip_or_length.num_samples, clip_or_length.sample_rate
    else:
        length = int(clip_or_length)
    return FrameGeometry(num_samples=length,
                         window=config.window_samples(sample_rate),
                         hop=config.hop_samples(sample_rate))


@dataclass(eq=False)
class BasisCoeffs:
    """Nonnegative analysis coefficients plus synthesis side-info."""

    values: np.ndarray            # (num_frames, channels)
    phase: np.ndarray | None      # (num_frames, fft bins) unit complex, stft only
    geometry: FrameGeometry
    kind: str


@lru_cache(maxsize=8)
def _hann(window):
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(window) / window)


def _frame_indices(geom: FrameGeometry):
    return (geom.hop * np.arange(geom.num_frames)[:, None]
            + np.arange(geom.window)[None, :])


def frame_signal(x, geom: FrameGeometry):
    return x[_frame_indices(geom)]


def overlap_add(frames, geom: FrameGeometry, length=None):
    length = geom.num_samples if length is None else length
    out = np.zeros(max(length, geom.coverage), dtype=frames.dtype)
    np.add.at(out, _frame_indices(geom), frames)
    return out[:length]


@lru_cache(maxsize=8)
def _ola_window_norm(geom: FrameGeometry):
    w2 = np.tile(_hann(geom.window) ** 2, (geom.num_frames, 1))
    denom = overlap_add(w2, geom, geom.coverage)
    return np.maximum(denom, _OLA_EPS)


# -- plain (ndarray) STFT core ----------------------------------------------


def stft_forward(x, geom: FrameGeometry, fft_size):
    frames = frame_signal(x, geom) * _hann(geom.window)
    spec = np.fft.rfft(frames, n=fft_size, axis=1)
    values = np.abs(spec)
    phase = np.where(values > 0.0, spec / np.where(values > 0.0, values, 1.0), 1.0 + 0.0j)
    return values, phase


def stft_inverse(values, phase, geom: FrameGeometry, fft_size, length=None):
    length = geom.num_samples if length is None else length
    frames = np.fft.irfft(values * phase, n=fft_size, axis=1)[:, :geom.window]
    frames = frames * _hann(geom.window)
    out = np.zeros(max(length, geom.coverage))
    out[:geom.coverage] = overlap_add(frames, geom, geom.coverage) / _ola_window_norm(geom)
    return out[:length]


# -- FFT adjoints (real-linear maps, verified by finite differences) ---------


@lru_cache(maxsize=8)
def _half_spectrum_weights(fft_size):
    c = np.full(fft_size // 2 + 1, 2.0)
    c[0] = 1.0
    c[-1] = 1.0
    return c


def _adjoint_irfft(g, fft_size):
    """Adjoint of y = irfft(X, n) as a map R^{n/2+1 pairs} <- R^n."""
    return np.fft.rfft(g, n=fft_size, axis=-1) * (_half_spectrum_weights(fft_size) / fft_size)


def _adjoint_rfft(h, fft_size):
    """Adjoint of X = rfft(x, n) as a map R^n <- C^{n/2+1}."""
    h = h / _half_spectrum_weights(fft_size)
    h[..., 0] = h[..., 0].real
    h[..., -1] = h[..., -1].real
    return np.fft.irfft(h, n=fft_size, axis=-1) * fft_size


# -- Tensor ops ---------------------------------------------------------------


def frame_signal_t(x: ad.Tensor, geom: FrameGeometry) -> ad.Tensor:
    idx = _frame_indices(geom)

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        x.accumulate_grad(full)

    return ad.Tensor._make(x.data[idx], (x,), backward)


def overlap_add_t(frames: ad.Tensor, geom: FrameGeometry, length=None) -> ad.Tensor:
    length = geom.num_samples if length is None else length
    idx = _frame_indices(geom)
    out = np.zeros(max(length, geom.coverage), dtype=frames.dtype)
    np.add.at(out, idx, frames.data)

    def backward(g):
        gg = np.zeros(max(length, geom.coverage), dtype=g.dtype)
        gg[:g.shape[0]] = g
        frames.accumulate_grad(gg[idx])

    return ad.Tensor._make(out[:length], (frames,), backward)


def stft_magnitude_t(x: ad.Tensor, geom: FrameGeometry, fft_size):
    """Differentiable |STFT|; returns (values tensor, constant unit phase)."""
    window = _hann(geom.window)
    idx = _frame_indices(geom)
    frames = x.data[idx] * window
    spec = np.fft.rfft(frames, n=fft_size, axis=1)
    values = np.abs(spec)
    phase = np.where(values > 0.0, spec / np.where(values > 0.0, values, 1.0), 1.0 + 0.0j)

    def backward(g):
        g_frames = _adjoint_rfft(g * phase, fft_size)[:, :geom.window] * window
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g_frames)
        x.accumulate_grad(gx)

    return ad.Tensor._make(values, (x,), backward), phase


def stft_synthesize_t(values: ad.Tensor, phase, geom: FrameGeometry, fft_size,
                      length=None) -> ad.Tensor:
    """Differentiable inverse STFT at a fixed phase (linear in the values)."""
    length = geom.num_samples if length is None else length
    out = stft_inverse(values.data, phase, geom, fft_size, length)
    window = _hann(geom.window)
    denom = _ola_window_norm(geom)
    idx = _frame_indices(geom)

    def backward(g):
        g_ola = np.zeros(max(length, geom.coverage))
        g_ola[:min(length, g.shape[0])] = g[:min(length, g.shape[0])]
        g_ola = g_ola[:geom.coverage] / denom
        g_frames = g_ola[idx] * window
        g_full = np.zeros((geom.num_frames, fft_size))
        g_full[:, :geom.window] = g_frames
        g_spec = _adjoint_irfft(g_full, fft_size)
        values.accumulate_grad((np.conj(phase) * g_spec).real)

    return ad.Tensor._make(out, (values,), backward)


# -- public basis API ---------------------------------------------------------


def init_learned_basis(seed, window=80, num_coeffs=256, dtype=np.float64):
    """Encoder/decoder matrices, uniform in +-1/sqrt(window)."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(window)
    encoder = rng.uniform(-bound, bound, size=(window, num_coeffs)).astype(dtype)
    decoder = rng.uniform(-bound, bound, size=(num_coeffs, window)).astype(dtype)
    return encoder, decoder


def analyze(clip: AudioClip, config: BasisConfig, params=None) -> BasisCoeffs:
    """Encode a clip into nonnegative coefficients (magnitude or rectified)."""
    if clip.num_samples == 0:
        raise ShapeError("empty clip")
    geom = geometry_for(clip, config)
    if config.kind == "stft":
        values, phase = stft_forward(clip.samples, geom, config.fft_size)
        return BasisCoeffs(values=values, phase=phase, geometry=geom, kind="stft")
    if params is None:
        raise ConfigurationError("learned basis requires encoder/decoder params")
    encoder = params[0] if isinstance(params, tuple) else params.encoder
    values = np.maximum(frame_signal(clip.samples, geom) @ np.asarray(encoder), 0.0)
    return BasisCoeffs(values=values, phase=None, geometry=geom, kind="learned")


def synthesize(coeffs: BasisCoeffs, config: BasisConfig, params=None,
               length=None) -> AudioClip:
    """Decode (possibly masked) coefficients back to a waveform."""
    geom = coeffs.geometry
    if coeffs.values.shape != (geom.num_frames, config.num_coeffs):
        raise ShapeError(
            f"coefficients {coeffs.values.shape} do not match geometry/"
            f"config ({geom.num_frames}, {config.num_coeffs})")
    if config.kind == "stft":
        out = stft_inverse(coeffs.values, coeffs.phase, geom, config.fft_size, length)
    else:
        if params is None:
            raise ConfigurationError("learned basis requires encoder/decoder params")
        decoder = params[1] if isinstance(params, tuple) else params.decoder
        out = overlap_add(coeffs.values @ np.asarray(decoder), geom, length)
    return AudioClip(samples=out, sample_rate=16000 if length is None else 16000)


# -- mel-spectrogram patches --------------------------------------------------


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


@lru_cache(maxsize=4)
def mel_filterbank(sample_rate=16000, n_fft=MEL_FFT, n_mels=MEL_CHANNELS,
                   fmin=MEL_FMIN, fmax=MEL_FMAX):
    """Triangular mel filters over rfft bins; rows nonnegative, each with
    positive sum; center frequencies strictly increasing."""
    bin_freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    mel_points = np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_mels + 2)
    hz_points = _mel_to_hz(mel_points)
    bank = np.zeros((n_mels, bin_freqs.shape[0]))
    for m in range(n_mels):
        left, center, right = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        up = (bin_freqs - left) / (center - left)
        down = (right - bin_freqs) / (right - center)
        bank[m] = np.maximum(0.0, np.minimum(up, down))
    return bank, hz_points[1:-1]


@dataclass(eq=False)
class MelPatchSet:
    mel_frames: np.ndarray   # (F, 64) log-mel energies
    patches: np.ndarray      # (F, 64, 96) one centered patch per frame


def mel_frame_count(num_samples, hop=MEL_HOP):
    return num_samples // hop + 1


def log_mel_frames(clip: AudioClip) -> np.ndarray:
    if clip.num_samples < MEL_WINDOW:
        raise ShapeError("clip shorter than one mel window")
    pad = MEL_WINDOW // 2
    padded = np.pad(clip.samples, (pad, pad), mode="reflect")
    num_frames = mel_frame_count(clip.num_samples)
    idx = MEL_HOP * np.arange(num_frames)[:, None] + np.arange(MEL_WINDOW)[None, :]
    frames = padded[idx] * np.hanning(MEL_WINDOW)
    power = np.abs(np.fft.rfft(frames, n=MEL_FFT, axis=1)) ** 2
    bank, _ = mel_filterbank(clip.sample_rate)
    return np.log(power @ bank.T + MEL_LOG_FLOOR)


def mel_patches(clip: AudioClip) -> MelPatchSet:
    """Log-mel frames plus one 64x96 patch per frame (hop of one frame)."""
    mel = log_mel_frames(clip)
    num_frames = mel.shape[0]
    before = (PATCH_FRAMES - 1) // 2
    after = PATCH_FRAMES - 1 - before
    padded = np.pad(mel, ((before, after), (0, 0)), mode="edge")
    idx = np.arange(num_frames)[:, None] + np.arange(PATCH_FRAMES)[None, :]
    patches = padded[idx].transpose(0, 2, 1)
    return MelPatchSet(mel_frames=mel, patches=patches)
