"""Select the compiled kernels when available, else the Python fallback.

Set ``QCLIMIT_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("QCLIMIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

label_components = _impl.label_components
bilinear_sample = _impl.bilinear_sample
cubic_sample = _impl.cubic_sample
