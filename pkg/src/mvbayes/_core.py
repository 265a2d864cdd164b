"""Kernel dispatch: compiled extension when importable, numpy fallback otherwise.

Set ``MVBAYES_PURE_PYTHON=1`` to force the fallback.
"""

import logging
import os

import numpy as np

from mvbayes import _fallback

logger = logging.getLogger(__name__)

BACKEND = "python"

if os.environ.get("MVBAYES_PURE_PYTHON", "") not in ("", "0"):
    _impl = _grid = _fallback
else:
    try:
        from mvbayes import _grid
        from mvbayes import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        logger.info("compiled kernels unavailable, using numpy fallback")
        _impl = _grid = _fallback


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def ar_recursion(mu, phi, eps, lags):
    return _impl.ar_recursion(float(mu), _c(phi), _c(eps), _c(lags))


def dp_backward(mean_e, second_e, r0, probs):
    return _impl.dp_backward(_c(mean_e), _c(second_e), _c(r0), _c(probs))


def max_two_state_objective(Eu, E2u, Ed, E2d, omega):
    return _grid.max_two_state_objective(_c(Eu), _c(E2u), _c(Ed), _c(E2d), float(omega))
