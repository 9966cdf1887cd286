"""Kernel backend selection.

The loop-heavy kernels (full-pivot LU, ILUT row elimination, CSR triangular
solves) exist twice: a Cython extension (``_core``) built at install time and
a pure-numpy fallback (``_pure``). The compiled module is preferred; set
``MFHODLR_PURE_PYTHON=1`` to force the fallback, e.g. for benchmarking.
"""

import os

if os.environ.get("MFHODLR_PURE_PYTHON"):
    from . import _pure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _pure as _impl

        BACKEND = "pure"

full_pivot_lu = _impl.full_pivot_lu
ilut_factor = _impl.ilut_factor
solve_lower_unit_csr = _impl.solve_lower_unit_csr
solve_upper_csr = _impl.solve_upper_csr

__all__ = [
    "BACKEND",
    "full_pivot_lu",
    "ilut_factor",
    "solve_lower_unit_csr",
    "solve_upper_csr",
]
