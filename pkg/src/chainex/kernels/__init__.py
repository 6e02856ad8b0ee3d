"""LSTM sequence kernels with a compiled fast path and a numpy fallback.

The compiled extension is selected at import when it built successfully;
CHAINEX_KERNEL=python|compiled forces a backend.  Callers go through the
dispatch functions below, so set_backend() takes effect immediately.
"""

from __future__ import annotations

import os

from . import reference

_BACKENDS = {"python": reference}
try:
    from . import _ckernels

    _BACKENDS["compiled"] = _ckernels
except ImportError:
    _ckernels = None


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


_requested = os.environ.get("CHAINEX_KERNEL")
if _requested:
    if _requested not in _BACKENDS:
        raise ImportError(
            f"CHAINEX_KERNEL={_requested!r} is not available; "
            f"available backends: {sorted(_BACKENDS)}"
        )
    _active = _requested
else:
    _active = "compiled" if "compiled" in _BACKENDS else "python"


def active_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(_BACKENDS)}")
    _active = name


def get_backend(name: str):
    return _BACKENDS[name]


def lstm_forward(x, wx, wh, b, h0, c0):
    return _BACKENDS[_active].lstm_forward(x, wx, wh, b, h0, c0)


def lstm_backward(x, wx, wh, h, c, gates, h0, c0, dh):
    return _BACKENDS[_active].lstm_backward(x, wx, wh, h, c, gates, h0, c0, dh)
