"""Sound separation conditioned on sound-classifier embeddings.

Subpackages cover synthetic dataset generation, analysis/synthesis
frontends, a depthwise-separable-convolution classifier, the embedding
algebra (soft-OR fusion, probability/logit conversion), the masking
separator with conditioning injection, permutation-invariant losses and
SI-SDR metrics, and an experiment harness with a CLI.
"""

__version__ = "0.1.0"
