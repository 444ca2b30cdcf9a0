"""Kernel backend selection.

Hot loops (per-experiment sampling, the profile-likelihood scan) exist twice:
a numba ``@njit`` version and a pure-numpy version.  The numba path is used
when numba imports cleanly, unless ``PNRCOUNT_DISABLE_NUMBA`` is set to a
truthy value in the environment before :mod:`pnrcount` is imported.
"""
import os

ENV_FLAG = "PNRCOUNT_DISABLE_NUMBA"


def _flag_set():
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


try:
    import numba  # noqa: F401
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _flag_set()


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
