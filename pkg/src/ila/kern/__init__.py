"""Hot-kernel backend selection.

The compiled Cython module is preferred; the pure-NumPy reference
implementation is used when the extension is unavailable or when
``ILA_PURE_PYTHON=1`` is set.
"""

import os

from . import pyref

if os.environ.get("ILA_PURE_PYTHON"):
    _impl = pyref
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pyref

union_cost = _impl.union_cost
union_cost_grad = _impl.union_cost_grad
box_qp = _impl.box_qp


def backend() -> str:
    """Name of the active backend: ``compiled`` or ``python``."""
    return _impl.BACKEND
