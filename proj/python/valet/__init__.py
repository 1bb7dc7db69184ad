"""Lifetime-aware data placement stack for zoned storage.

Thin re-export of the _valet extension module.  The extension lives inside
the package when built with pip/setuptools (valet._valet) and next to it on
PYTHONPATH when built by CMake (_valet); both layouts are supported.
"""

try:
    from valet._valet import *  # noqa: F401,F403
    from valet._valet import __version__  # noqa: F401
except ImportError:  # CMake build tree: top-level extension
    from _valet import *  # noqa: F401,F403
    from _valet import __version__  # noqa: F401

__all__ = [
    "__version__",
    "ValetError",
    "Device",
    "Placement",
    "generate_trace",
    "read_trace_ops",
    "builtin_ruleset",
    "replay_trace",
    "fsck_meta",
    "resolve_stream_hint",
    "OF_READ",
    "OF_WRITE",
    "OF_CREATE",
    "OF_TRUNC",
    "OF_APPEND",
]
