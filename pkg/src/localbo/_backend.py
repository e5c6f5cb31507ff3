"""Backend selection: compiled Cython core when importable, NumPy otherwise.

Set ``LOCALBO_BACKEND=pure`` (or ``compiled``) to force a choice; the default
prefers the compiled extension. ``active_backend()`` reports what got picked.
"""
from __future__ import annotations

import os

from . import _core_np

_FORCED = os.environ.get("LOCALBO_BACKEND", "").strip().lower()

_core_cy = None
if _FORCED != "pure":
    try:
        from . import _core_cy  # type: ignore[no-redef]
    except ImportError:
        _core_cy = None
        if _FORCED == "compiled":
            raise ImportError(
                "LOCALBO_BACKEND=compiled but the localbo._core_cy extension is not built"
            )

core = _core_cy if _core_cy is not None else _core_np

BACKENDS = {"pure": _core_np}
if _core_cy is not None:
    BACKENDS["compiled"] = _core_cy


def active_backend() -> str:
    return "compiled" if core is not _core_np else "pure"
