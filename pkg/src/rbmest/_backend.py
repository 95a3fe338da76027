"""Selects the compiled sampling kernel when it is importable.

Set ``RBMEST_BACKEND=python`` to force the numpy fallback.
"""

import os

from . import _pt_python

try:
    from . import _pt_kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

KERNELS = {"python": _pt_python.pt_sweeps}
if _compiled is not None:
    KERNELS["compiled"] = _compiled.pt_sweeps

_requested = os.environ.get("RBMEST_BACKEND", "").strip().lower()
if _requested and _requested not in ("python", "compiled"):
    raise ImportError(f"unknown RBMEST_BACKEND {_requested!r}")
if _requested == "compiled" and _compiled is None:
    raise ImportError("RBMEST_BACKEND=compiled but the extension is not built")

DEFAULT = _requested or ("compiled" if _compiled is not None else "python")


def get_kernel(name: str | None = None):
    name = name or DEFAULT
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"sampling backend {name!r} is not available; have {sorted(KERNELS)}") from None
