"""Hot numeric kernels: compiled core with a numpy fallback.

The compiled extension is selected at import time when present; set
MKGC_PURE_PYTHON=1 to force the reference implementation. `BACKEND`
names the active backend. `benchmarks/bench_kernels.py` compares the two.
"""

import os

from . import reference

BACKEND = "reference"
_impl = reference
if os.environ.get("MKGC_PURE_PYTHON", "0") != "1":
    try:
        from . import _native

        _impl = _native
        BACKEND = "native"
    except ImportError:
        pass

transe_epoch = _impl.transe_epoch
renorm_rows = _impl.renorm_rows
all_tail_scores = _impl.all_tail_scores
