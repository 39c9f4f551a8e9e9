"""Import-time selection of the QP/LP kernels.

The compiled extension is preferred; set ``VOCBF_PURE_PYTHON=1`` to force the
pure-Python fallback (useful for debugging and for the benchmark).
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("VOCBF_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "compiled"

OPTIMAL = _kernels_py.OPTIMAL
INFEASIBLE = _kernels_py.INFEASIBLE
MAX_N = _kernels_py.MAX_N
MAX_M = _kernels_py.MAX_M

solve_qp_dense = _impl.solve_qp_dense
halfplane_feasible = _impl.halfplane_feasible
