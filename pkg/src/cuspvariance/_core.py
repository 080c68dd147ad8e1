"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the pure-Python
module takes over.  Setting ``CUSPVARIANCE_PURE=1`` forces the fallback.
``form_grid`` is a dense matrix product and always runs on NumPy/BLAS,
which beats the compiled loop.
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("CUSPVARIANCE_PURE", "").strip() not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND: str = _impl.BACKEND
kloosterman = _impl.kloosterman
kloosterman_many = _impl.kloosterman_many
bessel_j = _impl.bessel_j
bessel_j_many = _impl.bessel_j_many
k_imag_double = _impl.k_imag_double
form_grid = _pykernels.form_grid

__all__ = [
    "BACKEND",
    "kloosterman",
    "kloosterman_many",
    "bessel_j",
    "bessel_j_many",
    "k_imag_double",
    "form_grid",
]
