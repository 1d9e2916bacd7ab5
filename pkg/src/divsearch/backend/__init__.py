"""Backend selection for the hot numerical kernels.

The compiled Cython extension is preferred when importable; otherwise the
pure-NumPy implementation in ``_purepy`` is used. Set ``DIVSEARCH_BACKEND``
to ``compiled`` or ``python`` to force a choice (``compiled`` raises if the
extension is missing). ``benchmarks/bench_backends.py`` compares the two.
"""

from __future__ import annotations

import os

_requested = os.environ.get("DIVSEARCH_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "compiled", "python"):
    raise RuntimeError(
        f"DIVSEARCH_BACKEND={_requested!r} not understood; use 'compiled' or 'python'"
    )

if _requested == "python":
    from . import _purepy as _impl

    BACKEND = "python"
else:
    try:
        from . import _fastcore as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _purepy as _impl

        BACKEND = "python"

matern52_cross = _impl.matern52_cross
matern52_gram = _impl.matern52_gram
min_dist = _impl.min_dist
mc_min_dist_mean = _impl.mc_min_dist_mean

__all__ = ["BACKEND", "matern52_cross", "matern52_gram", "min_dist", "mc_min_dist_mean"]
