"""Pick the compiled core when it is importable, else the numpy fallback.

Set ``SBPLAB_PURE=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback
if os.environ.get("SBPLAB_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback


def sine_transform(k, r, wg):
    return _impl.sine_transform(k, r, wg)


def power_term(u, p):
    """Return ``(u|u|^(p-2), sum|u|^p)`` for a 1-D contiguous view of ``u``."""
    return _impl.power_term(u.reshape(-1), float(p))
