"""Hot-kernel backend selection.

Prefers the compiled extension (tempseg._kernels._core) when it built;
otherwise falls back to the numpy reference implementations.  Setting
TEMPSEG_PURE_PYTHON=1 forces the fallback.
"""

import os

from . import _ref

if os.environ.get("TEMPSEG_PURE_PYTHON") == "1":
    _impl = _ref
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _ref

BACKEND: str = _impl.BACKEND
conv1d_forward = _impl.conv1d_forward
conv1d_backward = _impl.conv1d_backward
viterbi_path = _impl.viterbi_path


def backend() -> str:
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return BACKEND
