"""Hot-path kernels: nearest-point mesh queries and gaussian field sums.

The compiled Cython core is preferred when its extension was built; a pure
numpy twin is the fallback.  Set ``PALPATRON_PURE_PYTHON=1`` to force the
fallback (used by the kernel parity tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _backend_numpy

if os.environ.get("PALPATRON_PURE_PYTHON", "") not in ("", "0"):
    _impl = _backend_numpy
else:
    try:
        from . import _corekernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _backend_numpy

backend_name: str = _impl.NAME
mesh_nearest = _impl.mesh_nearest
mesh_nearest_batch = _impl.mesh_nearest_batch
gauss_sum = _impl.gauss_sum


def backends() -> dict[str, object]:
    """All importable backends, keyed by name (for tests and benchmarks)."""
    found: dict[str, object] = {_backend_numpy.NAME: _backend_numpy}
    try:
        from . import _corekernels
        found[_corekernels.NAME] = _corekernels
    except ImportError:
        pass
    return found
