"""Hot kernels with a compiled core and a pure-Python fallback.

The compiled extension is used when it imports; set ``FICIC_PURE_PYTHON=1``
to force the fallback. :func:`use_backend` switches at runtime (used by the
benchmark and the equivalence tests).
"""

import os

from . import _fallback

try:
    from . import _core as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _fallback}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

_active = _fallback if os.environ.get("FICIC_PURE_PYTHON") == "1" or _compiled is None else _compiled


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def backend() -> str:
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def use_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    _active = _BACKENDS[name]


def fixed_point(h, gamma, lam0, tol, max_iter):
    return _active.fixed_point(h, gamma, lam0, tol, max_iter)


def directions(h, lam):
    return _active.directions(h, lam)
