"""Error types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid or inconsistent configuration values."""


class LoadError(RuntimeError):
    """Missing or corrupt persisted data (manifests, WAVs, checkpoints)."""


class TrainingError(RuntimeError):
    """Training diverged or could not proceed."""
