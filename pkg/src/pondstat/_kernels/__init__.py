"""Kernel selection: compiled extension if available, else pure Python.

Set ``PONDSTAT_PURE_PYTHON=1`` to force the fallback (used by the
benchmark and by tests that exercise both implementations).
"""

import os

from . import _pykernels

if os.environ.get("PONDSTAT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _pykernels

IMPL = _impl.IMPL
parse_block = _impl.parse_block
parse_numeric_cells = _impl.parse_numeric_cells
moment_sweep = _impl.moment_sweep
eval_program = _impl.eval_program


def implementations():
    """All importable kernel implementations (compiled first)."""
    impls = []
    try:
        from . import _ckernels

        impls.append(_ckernels)
    except ImportError:
        pass
    impls.append(_pykernels)
    return impls
