"""Kernel backend selection.

The compiled extension is used when it imports; ``LITEDEPTH_BACKEND=python``
forces the numpy fallback, ``LITEDEPTH_BACKEND=compiled`` makes a missing
extension an import error instead of a silent downgrade.
"""

import logging
import os

from . import _fallback

logger = logging.getLogger(__name__)

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_requested = os.environ.get("LITEDEPTH_BACKEND", "auto").lower()
if _requested not in ("auto", "python", "compiled"):
    raise ImportError(f"LITEDEPTH_BACKEND must be auto, python or compiled, got {_requested!r}")
if _requested == "compiled" and _compiled is None:
    raise ImportError("LITEDEPTH_BACKEND=compiled but litedepth.ops._kernels is not built")

if _compiled is not None and _requested != "python":
    kernels = _compiled
    BACKEND = "compiled"
else:
    kernels = _fallback
    BACKEND = "python"
    if _compiled is None:
        logger.debug("compiled kernels unavailable; using numpy fallback")


def available_backends():
    names = ["python"]
    if _compiled is not None:
        names.insert(0, "compiled")
    return names


def get_kernels(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    if name is None:
        return kernels
    if name == "python":
        return _fallback
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
