"""Backend selection for the simulation kernels.

The compiled extension is preferred; ``LATQUEUE_BACKEND=python`` forces the
pure-Python fallback.  Both expose ``discrete_chunk`` and ``continuous_chunk``.
"""

import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def get_backend(name=None):
    """Return the kernel module for ``"compiled"``, ``"python"`` or the default."""
    name = name or os.environ.get("LATQUEUE_BACKEND", "auto")
    if name == "python":
        return _fallback
    if name in ("compiled", "cython"):
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _compiled
    if name != "auto":
        raise ValueError(f"unknown backend {name!r}")
    return _compiled if _compiled is not None else _fallback


def available():
    return ["compiled", "python"] if _compiled is not None else ["python"]


backend = get_backend()
BACKEND = "python" if backend is _fallback else "compiled"
