"""Convolution kernel backend selection.

The compiled Cython extension is used when it importable; otherwise the
numpy reference implementation takes over.  `SEMSEP_KERNEL_BACKEND`
(``cython`` or ``numpy``) forces a backend explicitly; forcing ``cython``
raises if the extension is missing.
"""

import os

from semsep.kernels import reference

_forced = os.environ.get("SEMSEP_KERNEL_BACKEND", "").strip().lower()

if _forced == "numpy":
    _impl = reference
    BACKEND = "numpy"
else:
    try:
        from semsep.kernels import _convkern as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        _impl = reference
        BACKEND = "numpy"

depthwise_conv2d_fwd = _impl.depthwise_conv2d_fwd
depthwise_conv2d_bwd = _impl.depthwise_conv2d_bwd
dilated_conv1d_fwd = _impl.dilated_conv1d_fwd
dilated_conv1d_bwd = _impl.dilated_conv1d_bwd
