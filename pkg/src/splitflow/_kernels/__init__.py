"""Kernel backend selection.

The compiled Cython backend is preferred when its extension built; otherwise
the numpy fallback is used. ``SPLITFLOW_KERNELS=python`` forces the fallback,
``SPLITFLOW_KERNELS=compiled`` makes a missing extension a hard error.
"""

import os

_choice = os.environ.get("SPLITFLOW_KERNELS", "").strip().lower()

if _choice == "python":
    from . import _pykernels as _impl
elif _choice == "compiled":
    from . import _cykernels as _impl
elif _choice == "":
    try:
        from . import _cykernels as _impl
    except ImportError:
        from . import _pykernels as _impl
else:
    raise ImportError(
        f"SPLITFLOW_KERNELS={_choice!r} not recognized (use 'python' or 'compiled')"
    )

BACKEND = _impl.BACKEND
dot = _impl.dot
nrm2 = _impl.nrm2
axpy = _impl.axpy
combine = _impl.combine
soft_threshold = _impl.soft_threshold
clamp = _impl.clamp


def backend():
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return BACKEND
