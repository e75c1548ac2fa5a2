"""Kernel selection: compiled extension when importable, numpy fallback otherwise.

Set ``FUSETRACK_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import logging
import os

from . import _fallback

log = logging.getLogger(__name__)

if os.environ.get("FUSETRACK_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # extension not built
        log.debug("compiled kernels unavailable, using numpy fallback")
        _impl = _fallback
        BACKEND = "python"

pillar_mean = _impl.pillar_mean
greedy_assign = _impl.greedy_assign
