"""Kernel backend selection.

Hot loops are compiled with numba unless the environment variable
``BDFAMILY_NO_NUMBA`` is set to a non-empty value (other than ``0``), in
which case the pure-numpy implementations are used.  The same switch is
honoured automatically when numba is not importable.
"""
import os

_flag = os.environ.get("BDFAMILY_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _flag not in ("", "0", "false")

if not NUMBA_DISABLED:
    try:
        import numba  # noqa: F401
        NUMBA_AVAILABLE = True
    except ImportError:  # pragma: no cover - exercised only without numba
        NUMBA_AVAILABLE = False
else:
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and not NUMBA_DISABLED


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
