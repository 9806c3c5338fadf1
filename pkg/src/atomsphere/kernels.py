"""Backend selection for the propagation kernels.

The compiled extension is used when it was built; otherwise the numpy
fallback is imported. Setting ``ATOMSPHERE_PURE_PYTHON=1`` forces the
fallback (useful for benchmarking and for cross-checking the two).
"""

import os

from . import _kernels_py

if os.environ.get("ATOMSPHERE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

numerov_wave = _impl.numerov_wave
numerov_nodes = _impl.numerov_nodes
logderiv_propagate = _impl.logderiv_propagate

__all__ = ["BACKEND", "numerov_wave", "numerov_nodes", "logderiv_propagate"]
