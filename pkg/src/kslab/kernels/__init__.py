"""Hot numerical kernels with backend selection at import time.

The compiled extension ``_core`` (Cython) is preferred; the pure-NumPy
``_reference`` module is the fallback. Set the environment variable
``KSLAB_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
the parity tests).
"""

import os

from . import _reference

_force_pure = os.environ.get("KSLAB_PURE_PYTHON", "").strip().lower() in (
    "1",
    "true",
    "yes",
)

if _force_pure:
    _impl = _reference
    BACKEND = "python"
else:
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _reference
        BACKEND = "python"

SCHEME_UPWIND = _reference.SCHEME_UPWIND
SCHEME_CENTRAL = _reference.SCHEME_CENTRAL

laplacian = _impl.laplacian
helmholtz_apply = _impl.helmholtz_apply
cg_solve = _impl.cg_solve
upwind_flux_divergence = _impl.upwind_flux_divergence
max_face_speed = _impl.max_face_speed

__all__ = [
    "BACKEND",
    "SCHEME_UPWIND",
    "SCHEME_CENTRAL",
    "laplacian",
    "helmholtz_apply",
    "cg_solve",
    "upwind_flux_divergence",
    "max_face_speed",
]
