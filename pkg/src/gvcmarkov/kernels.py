"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``GVC_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

HAVE_COMPILED = False
if os.environ.get("GVC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    else:
        HAVE_COMPILED = True
else:
    _compiled = None

BACKEND = "cython" if HAVE_COMPILED else "numpy"

simulate_paths = _compiled.simulate_paths if HAVE_COMPILED else _kernels_py.simulate_paths
simulate_paths_py = _kernels_py.simulate_paths
