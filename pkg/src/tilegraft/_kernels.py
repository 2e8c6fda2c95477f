"""Backend selection for the histogram hot kernels.

The compiled extension is preferred when present.  Set
``TILEGRAFT_BACKEND=python`` to force the pure-numpy fallback (the benchmark
and parts of the test suite do this to compare both paths).
"""

from __future__ import annotations

import os

from tilegraft import _np_kernels

if os.environ.get("TILEGRAFT_BACKEND", "").lower() in ("python", "numpy"):
    _impl = _np_kernels
    BACKEND = "numpy"
else:
    try:
        from tilegraft import _fastk as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _np_kernels
        BACKEND = "numpy"

mass_logistic = _impl.mass_logistic
mass_triangular = _impl.mass_triangular
grad_logistic = _impl.grad_logistic
grad_triangular = _impl.grad_triangular
