"""Scan backend selection.

The compiled extension is preferred when it imported cleanly; the pure-numpy
module is the fallback and the semantic reference. Set GROUPLEARN_BACKEND to
"python" or "compiled" to force one (forcing "compiled" raises if the
extension is unavailable). Both expose the same scan_corr API and
are bit-identical, so the choice only affects speed.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _scan_py


def _load() -> ModuleType:
    forced = os.environ.get("GROUPLEARN_BACKEND", "").strip().lower()
    if forced == "python":
        return _scan_py
    try:
        from . import _scan  # type: ignore[attr-defined]
    except ImportError:
        if forced == "compiled":
            raise ImportError(
                "GROUPLEARN_BACKEND=compiled but the compiled extension is "
                "not built; run pip install with build tools available"
            ) from None
        return _scan_py
    if forced not in ("", "compiled"):
        raise ValueError(
            f"GROUPLEARN_BACKEND={forced!r} not recognized; "
            "use 'python' or 'compiled'"
        )
    return _scan


_impl = _load()

scan_corr = _impl.scan_corr
active_backend = _impl.BACKEND_NAME


def available_backends() -> tuple[str, ...]:
    """Names of backends importable in this environment."""
    names = ["python"]
    try:
        from . import _scan  # noqa: F401
    except ImportError:
        pass
    else:
        names.insert(0, "compiled")
    return tuple(names)
