"""Cross-entropy kernels with compiled/pure-python selection at import.

``dense_softmax_ce`` and ``ragged_softmax_ce`` come from the Cython
extension when it was built, unless PROPDETECT_PURE_PYTHON=1 is set.
``IMPLEMENTATION`` records which one is active; both expose identical
contracts (see kernels/benchmark for the speed comparison).
"""

import os

from . import _py_kernels

if os.environ.get("PROPDETECT_PURE_PYTHON") == "1":
    _impl = _py_kernels
    IMPLEMENTATION = "python"
else:
    try:
        from . import _ce_kernels as _impl
        IMPLEMENTATION = "cython"
    except ImportError:
        _impl = _py_kernels
        IMPLEMENTATION = "python"

dense_softmax_ce = _impl.dense_softmax_ce
ragged_softmax_ce = _impl.ragged_softmax_ce

__all__ = ["dense_softmax_ce", "ragged_softmax_ce", "IMPLEMENTATION"]
