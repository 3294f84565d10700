"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; otherwise the
numpy fallback is used. Set ``MCCS_DISABLE_EXT=1`` before import to force
the fallback (the benchmark suite uses this to compare backends).
"""

import os

from . import _kernels_py

if os.environ.get("MCCS_DISABLE_EXT"):
    _impl = _kernels_py
    USING_COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        USING_COMPILED = True
    except ImportError:
        _impl = _kernels_py
        USING_COMPILED = False

d4_analyze = _impl.d4_analyze
d4_synthesize = _impl.d4_synthesize
soft_threshold = _impl.soft_threshold
clip_unit_disk = _impl.clip_unit_disk
