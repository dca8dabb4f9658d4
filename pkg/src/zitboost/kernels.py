"""Kernel backend selection.

The compiled ``_kernels`` extension is preferred; the NumPy versions in
``_pykernels`` are used when it is unavailable or when the environment
variable ``ZITBOOST_PURE_PYTHON`` is set to a non-empty value.
"""
import os

from . import _pykernels

BACKEND = "python"
if not os.environ.get("ZITBOOST_PURE_PYTHON"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

log_a_series = _impl.log_a_series
scan_level = _impl.scan_level


def available_backends():
    """Return a mapping of backend name to kernel module."""
    backends = {"python": _pykernels}
    try:
        from . import _kernels

        backends["cython"] = _kernels
    except ImportError:
        pass
    return backends
