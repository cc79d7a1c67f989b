"""Selects the search-kernel backend at import time.

The compiled extension is preferred; the pure-Python twin is used when the
extension is unavailable or when ``ISOLTREE_PURE=1`` is set.  Both expose
``pick_leaf``, ``find_plan``, ``search_level2`` and ``search_level3`` with
identical semantics (see ``benchmarks/bench_kernel.py`` for the speed gap).
"""

from __future__ import annotations

import os

if os.environ.get("ISOLTREE_PURE") == "1":
    from . import _kernel_py as _impl
else:
    try:
        from . import _kernel as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernel_py as _impl

BACKEND: str = _impl.BACKEND
pick_leaf = _impl.pick_leaf
find_plan = _impl.find_plan
search_level2 = _impl.search_level2
search_level3 = _impl.search_level3
