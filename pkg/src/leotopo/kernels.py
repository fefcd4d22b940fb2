"""Hot-loop kernels: compiled extension when built, numpy/heapq otherwise.

Set ``LEOTOPO_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and the cross-backend tests).
"""
import os

from . import _kernels_py

PLAIN = _kernels_py.PLAIN
PRIORITIZED = _kernels_py.PRIORITIZED

_compiled = None
if os.environ.get("LEOTOPO_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as _compiled
    except ImportError:
        _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py
BACKEND = "cython" if _compiled is not None else "python"

flow_fields = _impl.flow_fields
link_costs = _impl.link_costs
dijkstra = _impl.dijkstra

__all__ = ["BACKEND", "PLAIN", "PRIORITIZED", "flow_fields", "link_costs", "dijkstra"]
