"""Kernel backend selection.

The compiled extension is preferred when built; the numpy fallback has
identical signatures and semantics. Set FLIDS_BACKEND=python (or =cython)
to force a choice; forcing cython raises if the extension is missing.
"""

from __future__ import annotations

import os

_choice = os.environ.get("FLIDS_BACKEND", "").strip().lower()

if _choice in ("", "cython"):
    try:
        from . import _kernels as kernels

        BACKEND = "cython"
    except ImportError:
        if _choice == "cython":
            raise
        from . import kernels_py as kernels

        BACKEND = "python"
elif _choice == "python":
    from . import kernels_py as kernels

    BACKEND = "python"
else:
    raise ValueError("FLIDS_BACKEND must be 'cython' or 'python', got %r" % _choice)
