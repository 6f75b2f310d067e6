"""Backend selection for the numeric kernels.

The environment variable ``SPIKESHAP_BACKEND`` picks the implementation:

* ``numba`` - require the compiled backend, fail if numba is missing
* ``numpy`` - force the pure-numpy fallback
* unset or ``auto`` - use numba when importable, else fall back to numpy

Both backends expose ``tree_predict``, ``best_split``, ``tree_phi`` and
``assign_points`` with identical contracts; see ``benchmarks/bench_kernels.py``
for a side-by-side timing.
"""

import os

_choice = os.environ.get("SPIKESHAP_BACKEND", "auto").strip().lower() or "auto"

if _choice == "numpy":
    from . import numpy_backend as _impl

    BACKEND = "numpy"
elif _choice == "numba":
    from . import numba_backend as _impl

    BACKEND = "numba"
elif _choice == "auto":
    try:
        from . import numba_backend as _impl

        BACKEND = "numba"
    except ImportError:
        from . import numpy_backend as _impl

        BACKEND = "numpy"
else:
    raise ImportError(
        f"SPIKESHAP_BACKEND={_choice!r} not recognized; use 'numba', 'numpy' or 'auto'"
    )

tree_predict = _impl.tree_predict
best_split = _impl.best_split
tree_phi = _impl.tree_phi
assign_points = _impl.assign_points

__all__ = ["BACKEND", "tree_predict", "best_split", "tree_phi", "assign_points"]
