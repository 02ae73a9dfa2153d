"""Timing-engine selection: compiled core when available, pure Python otherwise.

Set GNNDATAFLOW_ENGINE=py or =cy to force a specific engine.
"""

from __future__ import annotations

import os

from . import engine_py

_forced = os.environ.get("GNNDATAFLOW_ENGINE", "").strip().lower()

if _forced == "py":
    _impl = engine_py
    ENGINE_NAME = "python"
else:
    try:
        from . import _engine_cy as _impl  # type: ignore[attr-defined]

        ENGINE_NAME = "cython"
    except ImportError:
        if _forced == "cy":
            raise ImportError(
                "GNNDATAFLOW_ENGINE=cy but the compiled engine is not built; "
                "reinstall the package with a C compiler available"
            ) from None
        _impl = engine_py
        ENGINE_NAME = "python"


def run_pass(spec: engine_py.PassSpec) -> engine_py.PassResult:
    return _impl.run_pass(spec)
