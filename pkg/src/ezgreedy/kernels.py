"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise, or when
``EZGREEDY_BACKEND=python`` is set, the pure-Python ``_fallback`` module
provides the same functions.
"""

from __future__ import annotations

import os

from . import _fallback as fallback

try:
    from . import _core as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("EZGREEDY_BACKEND", "").lower() not in ("python", "py", "fallback"):
    _impl = compiled
    BACKEND = "compiled"
else:
    _impl = fallback
    BACKEND = "python"

q_learning = _impl.q_learning
select_actions = _impl.select_actions
explore_tabular = _impl.explore_tabular
explore_continuous = _impl.explore_continuous
sarsa_lambda = _impl.sarsa_lambda
coverage_bfs = _impl.coverage_bfs
