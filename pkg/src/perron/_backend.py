"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback is.  ``PERRON_BACKEND=python`` forces the fallback.
"""
from __future__ import annotations

import os

from . import _fallback

__all__ = ["kernels", "fallback", "compiled", "NAME", "use"]

fallback = _fallback
compiled = None

if os.environ.get("PERRON_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as compiled  # noqa: F811
    except ImportError:
        compiled = None

kernels = compiled if compiled is not None else fallback
NAME = kernels.NAME


def use(name):
    """Switch the active backend (``"compiled"`` or ``"python"``)."""
    global kernels, NAME
    if name == "python":
        kernels = fallback
    elif name == "compiled":
        if compiled is None:
            raise ImportError("the compiled kernel extension is not built")
        kernels = compiled
    else:
        raise ValueError(f"unknown backend {name!r}")
    NAME = kernels.NAME
    return kernels
