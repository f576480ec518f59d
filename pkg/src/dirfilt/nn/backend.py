"""Kernel backend selection: compiled extension if importable, NumPy otherwise.

Set ``DIRFILT_PURE=1`` to force the pure-Python kernels. Both backends share
the contract documented in :mod:`dirfilt.nn.kernels_py`.
"""

import os

from . import kernels_py

if os.environ.get("DIRFILT_PURE", "") not in ("", "0"):
    _impl = kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = kernels_py

COMPILED_AVAILABLE = getattr(_impl, "COMPILED", False)

lstm_seq_forward = _impl.lstm_seq_forward
lstm_seq_backward = _impl.lstm_seq_backward


def backend_name() -> str:
    return "compiled" if COMPILED_AVAILABLE else "pure-python"
