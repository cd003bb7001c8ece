"""Seeded synthetic source clips, two-source mixtures, and dataset I/O.

Sixteen default sound classes (eight parametric generator kinds, two
frequency registers each) stand in for a real labelled corpus so the
classifier can be pretrained with known ground truth.  Everything is a
pure function of (config, seed): rerunning generation produces
byte-identical WAV payloads and manifests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sps

from semsep.audio import AudioClip, ShapeError, read_wav, write_wav
from semsep.errors import ConfigurationError, LoadError

GENERATOR_KINDS = (
    "pure-tone",
    "harmonic-stack",
    "chirp",
    "lowpass-noise",
    "bandpass-noise",
    "highpass-noise",
    "am-noise",
    "click-train",
)

_SPLITS = ("train", "validation", "test")

# Base parameter ranges per kind; registers carve these geometrically.
_BASE_RANGES = {
    "pure-tone": {"freq": (220.0, 3600.0)},
    "harmonic-stack": {"freq": (110.0, 900.0)},
    "chirp": {"freq": (250.0, 4000.0)},
    "lowpass-noise": {"freq": (300.0, 1500.0)},
    "bandpass-noise": {"freq": (600.0, 3600.0), "bandwidth": (200.0, 800.0)},
    "highpass-noise": {"freq": (2200.0, 6200.0)},
    "am-noise": {"freq": (300.0, 5000.0), "rate": (2.0, 40.0)},
    "click-train": {"freq": (700.0, 4800.0), "rate": (3.0, 15.0)},
}

_RMS_RANGES = {"click-train": (0.06, 0.14)}
_DEFAULT_RMS_RANGE = (0.12, 0.3)


@dataclass(frozen=True)
class SoundClassSpec:
    """One synthetic sound class: a generator kind plus parameter ranges."""

    class_id: int
    generator_kind: str
    freq_range: tuple[float, float]
    rate_range: tuple[float, float] = (0.0, 0.0)
    bandwidth_range: tuple[float, float] = (0.0, 0.0)

    def validate(self, sample_rate: int) -> None:
        if self.generator_kind not in GENERATOR_KINDS:
            raise ConfigurationError(f"unknown generator kind {self.generator_kind!r}")
        lo, hi = self.freq_range
        if not (0.0 < lo <= hi):
            raise ConfigurationError(f"empty frequency range {self.freq_range}")
        if hi >= sample_rate / 2:
            raise ConfigurationError(
                f"frequency bound {hi} Hz is not below Nyquist ({sample_rate / 2} Hz)")
        if self.generator_kind in ("am-noise", "click-train"):
            rlo, rhi = self.rate_range
            if not (0.0 < rlo <= rhi):
                raise ConfigurationError(f"empty rate range {self.rate_range}")


def _split_range(lo, hi, register, num_registers):
    """Geometric slice of [lo, hi] for one frequency register."""
    edges = np.geomspace(lo, hi, num_registers + 1)
    return float(edges[register]), float(edges[register + 1])


def default_class_specs(num_classes: int = 16) -> list[SoundClassSpec]:
    """Class list cycling through the generator kinds across registers."""
    if num_classes < 1:
        raise ConfigurationError("num_classes must be >= 1")
    num_registers = -(-num_classes // len(GENERATOR_KINDS))
    specs = []
    for class_id in range(num_classes):
        kind = GENERATOR_KINDS[class_id % len(GENERATOR_KINDS)]
        register = class_id // len(GENERATOR_KINDS)
        base = _BASE_RANGES[kind]
        freq = _split_range(*base["freq"], register, num_registers)
        rate = base.get("rate", (0.0, 0.0))
        if rate != (0.0, 0.0) and num_registers > 1:
            rate = _split_range(*rate, register, num_registers)
        specs.append(SoundClassSpec(
            class_id=class_id,
            generator_kind=kind,
            freq_range=freq,
            rate_range=rate,
            bandwidth_range=base.get("bandwidth", (0.0, 0.0)),
        ))
    return specs


# -- source generators -----------------------------------------------------


def _fade_edges(x, sample_rate, ms=10.0):
    n = min(int(sample_rate * ms / 1000.0), x.shape[0] // 2)
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(n) / n)
    x[:n] *= ramp
    x[-n:] *= ramp[::-1]
    return x


def _gen_pure_tone(rng, spec, t, sample_rate):
    f = rng.uniform(*spec.freq_range)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    return _fade_edges(np.sin(2.0 * np.pi * f * t + phase), sample_rate)


def _gen_harmonic_stack(rng, spec, t, sample_rate):
    f0 = rng.uniform(*spec.freq_range)
    num_harmonics = int(rng.integers(3, 9))
    decay = rng.uniform(0.6, 1.4)
    x = np.zeros_like(t)
    for k in range(1, num_harmonics + 1):
        fk = k * f0
        if fk >= 0.45 * sample_rate:
            break
        x += k ** -decay * np.sin(2.0 * np.pi * fk * t + rng.uniform(0.0, 2.0 * np.pi))
    return _fade_edges(x, sample_rate)


def _gen_chirp(rng, spec, t, sample_rate):
    lo, hi = spec.freq_range
    f0, f1 = (lo, hi) if rng.uniform() < 0.5 else (hi, lo)
    f0 *= rng.uniform(0.9, 1.1)
    f1 *= rng.uniform(0.9, 1.1)
    x = sps.chirp(t, f0=f0, f1=f1, t1=t[-1], method="logarithmic",
                  phi=rng.uniform(0.0, 360.0))
    return _fade_edges(x, sample_rate)


def _filtered_noise(rng, t, sample_rate, btype, cutoff):
    noise = rng.standard_normal(t.shape[0])
    sos = sps.butter(4, cutoff, btype=btype, fs=sample_rate, output="sos")
    return sps.sosfilt(sos, noise)


def _gen_lowpass_noise(rng, spec, t, sample_rate):
    fc = rng.uniform(*spec.freq_range)
    return _fade_edges(_filtered_noise(rng, t, sample_rate, "lowpass", fc), sample_rate)


def _gen_highpass_noise(rng, spec, t, sample_rate):
    fc = rng.uniform(*spec.freq_range)
    return _fade_edges(_filtered_noise(rng, t, sample_rate, "highpass", fc), sample_rate)


def _gen_bandpass_noise(rng, spec, t, sample_rate):
    center = rng.uniform(*spec.freq_range)
    half_bw = 0.5 * rng.uniform(*spec.bandwidth_range)
    lo = max(center - half_bw, 40.0)
    hi = min(center + half_bw, 0.48 * sample_rate)
    x = _filtered_noise(rng, t, sample_rate, "bandpass", (lo, hi))
    return _fade_edges(x, sample_rate)


def _gen_am_noise(rng, spec, t, sample_rate):
    lo, hi = spec.freq_range
    carrier = _filtered_noise(rng, t, sample_rate, "bandpass", (lo, min(hi, 0.48 * sample_rate)))
    rate = rng.uniform(*spec.rate_range)
    depth = rng.uniform(0.6, 1.0)
    envelope = 1.0 - depth * 0.5 * (1.0 + np.cos(2.0 * np.pi * rate * t + rng.uniform(0, 2 * np.pi)))
    return _fade_edges(carrier * envelope, sample_rate)


def _gen_click_train(rng, spec, t, sample_rate):
    rate = rng.uniform(*spec.rate_range)
    f = rng.uniform(*spec.freq_range)
    tau = rng.uniform(0.3e-3, 1.0e-3)
    click_len = int(0.008 * sample_rate)
    tc = np.arange(click_len) / sample_rate
    click = np.exp(-tc / tau) * np.sin(2.0 * np.pi * f * tc)
    x = np.zeros(t.shape[0])
    pos = rng.uniform(0.0, 1.0 / rate)
    while pos < t[-1]:
        start = int(pos * sample_rate)
        end = min(start + click_len, x.shape[0])
        x[start:end] += rng.uniform(0.7, 1.0) * click[:end - start]
        pos += rng.uniform(0.8, 1.2) / rate
    return x


_GENERATORS = {
    "pure-tone": _gen_pure_tone,
    "harmonic-stack": _gen_harmonic_stack,
    "chirp": _gen_chirp,
    "lowpass-noise": _gen_lowpass_noise,
    "bandpass-noise": _gen_bandpass_noise,
    "highpass-noise": _gen_highpass_noise,
    "am-noise": _gen_am_noise,
    "click-train": _gen_click_train,
}


def generate_source(spec: SoundClassSpec, seed: int, duration: float = 3.0,
                    sample_rate: int = 16000) -> AudioClip:
    """Deterministic clip for (spec, seed), RMS-normalized into [0.05, 0.5]."""
    spec.validate(sample_rate)
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFF, spec.class_id])
    num_samples = round(sample_rate * duration)
    t = np.arange(num_samples) / sample_rate
    x = _GENERATORS[spec.generator_kind](rng, spec, t, sample_rate)
    target_rms = rng.uniform(*_RMS_RANGES.get(spec.generator_kind, _DEFAULT_RMS_RANGE))
    rms = np.sqrt(np.mean(x ** 2))
    if rms < 1e-12:
        raise ConfigurationError(f"generator produced silence for class {spec.class_id}")
    x = x * (target_rms / rms)
    peak = np.max(np.abs(x))
    if peak > 0.95:
        x *= 0.95 / peak
    x.setflags(write=False)
    return AudioClip(samples=x, sample_rate=sample_rate)


# -- mixtures ---------------------------------------------------------------


@dataclass(eq=False)
class MixtureExample:
    """A mixture with its post-scale sources, labels and provenance."""

    mixture: AudioClip
    sources: list[AudioClip]
    labels: list[np.ndarray]
    gains_db: list[float]
    seed: int
    split: str = "train"


def make_mixture(sources, gains_db, seed: int = 0, labels=None,
                 split: str = "train", peak_limit: float = 0.9) -> MixtureExample:
    """Sum gain-scaled sources, then apply one common scale so the mixture
    peak stays within `peak_limit`.  The stored sources sum to the stored
    mixture exactly."""
    if len(sources) != len(gains_db):
        raise ShapeError("need one gain per source")
    if len(sources) < 2:
        raise ConfigurationError("a mixture needs at least two sources")
    length = sources[0].num_samples
    rate = sources[0].sample_rate
    for s in sources:
        if s.num_samples != length or s.sample_rate != rate:
            raise ShapeError("sources must share length and sample rate")
    scaled = [10.0 ** (g / 20.0) * s.samples for s, g in zip(sources, gains_db)]
    peak = np.max(np.abs(np.sum(scaled, axis=0)))
    common = 1.0 if peak <= peak_limit else peak_limit * (1.0 - 1e-12) / peak
    stored = [common * x for x in scaled]
    mixture = np.sum(stored, axis=0)
    return MixtureExample(
        mixture=AudioClip(mixture, rate),
        sources=[AudioClip(x, rate) for x in stored],
        labels=list(labels) if labels is not None else [],
        gains_db=[float(g) for g in gains_db],
        seed=int(seed),
        split=split,
    )


# -- dataset build / load ----------------------------------------------------


@dataclass
class DatasetConfig:
    num_classes: int = 16
    sources_per_mixture: int = 2
    train_count: int = 2000
    val_count: int = 400
    test_count: int = 200
    seed: int = 0
    duration: float = 3.0
    sample_rate: int = 16000
    gain_low_db: float = -5.0
    gain_high_db: float = 5.0

    def counts(self):
        return {"train": self.train_count, "validation": self.val_count,
                "test": self.test_count}

    def validate(self):
        if self.num_classes < self.sources_per_mixture:
            raise ConfigurationError(
                f"cannot draw {self.sources_per_mixture} distinct classes "
                f"from {self.num_classes}")
        if self.sources_per_mixture < 2:
            raise ConfigurationError("sources_per_mixture must be >= 2")
        for split, count in self.counts().items():
            if count < 1:
                raise ConfigurationError(f"{split} count must be >= 1")


@dataclass
class ManifestEntry:
    id: str
    split: str
    mixture_path: str
    source_paths: list[str]
    labels: list[list[int]]
    gains_db: list[float]
    seed: int


@dataclass
class DatasetManifest:
    config: DatasetConfig
    entries: list[ManifestEntry]
    root: Path

    def __post_init__(self):
        self._by_id = {e.id: e for e in self.entries}
        if len(self._by_id) != len(self.entries):
            raise LoadError("duplicate example ids in manifest")

    def ids(self, split=None):
        return [e.id for e in self.entries if split is None or e.split == split]

    def entry(self, example_id):
        if example_id not in self._by_id:
            raise LoadError(f"unknown example id {example_id!r}")
        return self._by_id[example_id]


def _example_seed(global_seed, split_index, index):
    ss = np.random.SeedSequence([int(global_seed), split_index, index])
    return int(ss.generate_state(1, np.uint64)[0] >> 1)


def _multi_hot(class_id, num_classes):
    label = [0] * num_classes
    label[class_id] = 1
    return label


def generate_example(config: DatasetConfig, specs, split: str, index: int) -> MixtureExample:
    """Build one example deterministically from the dataset seed."""
    example_seed = _example_seed(config.seed, _SPLITS.index(split), index)
    rng = np.random.default_rng(example_seed)
    class_ids = [int(c) for c in rng.choice(config.num_classes,
                                            size=config.sources_per_mixture,
                                            replace=False)]
    gains = rng.uniform(config.gain_low_db, config.gain_high_db,
                        size=config.sources_per_mixture)
    sources = [generate_source(specs[c], seed=int(rng.integers(2 ** 31)),
                               duration=config.duration,
                               sample_rate=config.sample_rate)
               for c in class_ids]
    labels = [np.array(_multi_hot(c, config.num_classes)) for c in class_ids]
    return make_mixture(sources, list(gains), seed=example_seed,
                        labels=labels, split=split)


def build_dataset(config: DatasetConfig, out_dir) -> DatasetManifest:
    """Generate WAVs and the manifest for all splits under `out_dir`."""
    config.validate()
    specs = default_class_specs(config.num_classes)
    root = Path(out_dir)
    entries = []
    for split_index, split in enumerate(_SPLITS):
        (root / split).mkdir(parents=True, exist_ok=True)
        for index in range(config.counts()[split]):
            example = generate_example(config, specs, split, index)
            example_id = f"{split}-{index:05d}"
            mixture_path = f"{split}/{example_id}_mix.wav"
            source_paths = [f"{split}/{example_id}_src{k}.wav"
                            for k in range(len(example.sources))]
            write_wav(root / mixture_path, example.mixture)
            for path, source in zip(source_paths, example.sources):
                write_wav(root / path, source)
            entries.append(ManifestEntry(
                id=example_id,
                split=split,
                mixture_path=mixture_path,
                source_paths=source_paths,
                labels=[list(map(int, lab)) for lab in example.labels],
                gains_db=[float(g) for g in example.gains_db],
                seed=example.seed,
            ))
    manifest = DatasetManifest(config=config, entries=entries, root=root)
    save_manifest(manifest)
    return manifest


def save_manifest(manifest: DatasetManifest) -> None:
    root = manifest.root
    with open(root / "dataset_config.json", "w") as fh:
        json.dump(vars(manifest.config), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(root / "manifest.jsonl", "w") as fh:
        for e in manifest.entries:
            fh.write(json.dumps({
                "id": e.id, "split": e.split, "mixture_path": e.mixture_path,
                "source_paths": e.source_paths, "labels": e.labels,
                "gains_db": e.gains_db, "seed": e.seed,
            }) + "\n")


def load_manifest(root) -> DatasetManifest:
    root = Path(root)
    try:
        with open(root / "dataset_config.json") as fh:
            config = DatasetConfig(**json.load(fh))
        entries = []
        with open(root / "manifest.jsonl") as fh:
            for line in fh:
                rec = json.loads(line)
                entries.append(ManifestEntry(**rec))
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        raise LoadError(f"cannot read manifest under {root}: {exc}") from exc
    manifest = DatasetManifest(config=config, entries=entries, root=root)
    for e in manifest.entries:
        for path in [e.mixture_path, *e.source_paths]:
            if not (root / path).exists():
                raise LoadError(f"manifest references missing file {path}")
    return manifest


def load_example(manifest: DatasetManifest, example_id: str) -> MixtureExample:
    """Load one example from disk; samples round-trip within PCM16 quantization."""
    e = manifest.entry(example_id)
    try:
        mixture = read_wav(manifest.root / e.mixture_path)
        sources = [read_wav(manifest.root / p) for p in e.source_paths]
    except (OSError, ValueError) as exc:
        raise LoadError(f"cannot load example {example_id!r}: {exc}") from exc
    return MixtureExample(
        mixture=mixture,
        sources=sources,
        labels=[np.array(lab) for lab in e.labels],
        gains_db=list(e.gains_db),
        seed=e.seed,
        split=e.split,
    )
