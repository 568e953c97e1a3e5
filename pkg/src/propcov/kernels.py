"""Backend selection for the hot loops.

The compiled extension ``propcov._kernels`` is used when it imports; otherwise
(or when the environment variable ``PROPCOV_PURE_PYTHON`` is set to a
non-empty value other than ``0``) the numpy fallback is used.  Both expose
``flipflop`` and ``loglik`` with identical signatures.
"""
import os

from . import _fallback

if os.environ.get("PROPCOV_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
        BACKEND = "python"

flipflop = _impl.flipflop
loglik = _impl.loglik
