"""Kernel backend selection.

The compiled extension is preferred when importable; otherwise the
pure-Python kernel takes over transparently.  Setting the environment
variable ``MMISQ_BACKEND=python`` forces the fallback (useful for testing
and benchmarking the two against each other).
"""

import os

from . import _pykernel

if os.environ.get("MMISQ_BACKEND", "").strip().lower() == "python":
    kernel = _pykernel
else:
    try:
        from . import _core as kernel  # type: ignore[no-redef]
    except ImportError:
        kernel = _pykernel

BACKEND: str = kernel.BACKEND_NAME
