"""Backend selection for the hot kernels.

The compiled extension (``hdram._kernels``) is used when it imports; otherwise
the numpy fallback in ``hdram._kernels_py`` takes over. Set
``HDRAM_BACKEND=python`` to force the fallback.
"""

import contextlib
import os

from hdram import _kernels_py

try:
    from hdram import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

_FUNCTIONS = ("bifix_violations", "min_hamming", "accumulate_outer", "batch_decode", "power_iteration")
PREFIX = _kernels_py.PREFIX
SUFFIX = _kernels_py.SUFFIX
NULL_ITERATE = _kernels_py.NULL_ITERATE

BACKEND = ""


def available():
    """Names of the importable backends."""
    return sorted(BACKENDS)


def use(name):
    """Route every kernel call through backend ``name``."""
    global BACKEND
    if name not in BACKENDS:
        raise ValueError(f"unknown or unavailable kernel backend {name!r}; have {available()}")
    module = BACKENDS[name]
    for fn in _FUNCTIONS:
        globals()[fn] = getattr(module, fn)
    BACKEND = name


@contextlib.contextmanager
def backend(name):
    """Temporarily switch backends (used by tests and the benchmark)."""
    previous = BACKEND
    use(name)
    try:
        yield BACKENDS[name]
    finally:
        use(previous)


use(os.environ.get("HDRAM_BACKEND") or ("compiled" if _compiled is not None else "python"))
