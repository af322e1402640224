"""Hot numerical kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it imports cleanly; set the environment
variable ``MWGLMB_PURE=1`` to force the pure-Python implementation.
"""
import os

from . import _pykernels as python_backend

try:
    if os.environ.get("MWGLMB_PURE", "") not in ("", "0"):
        raise ImportError("pure backend requested")
    from . import _ckernels as _impl
except ImportError:
    _impl = python_backend
    compiled_backend = None
else:
    compiled_backend = _impl

BACKEND = _impl.BACKEND
predict = _impl.predict
update = _impl.update
gaussian_loglik = _impl.gaussian_loglik
gibbs_assign = _impl.gibbs_assign

__all__ = ["BACKEND", "predict", "update", "gaussian_loglik", "gibbs_assign",
           "python_backend", "compiled_backend"]
