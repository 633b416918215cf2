"""Select the float-kernel implementation at import time.

Prefers the compiled `_ckernels` extension; falls back to the pure-Python
`_pykernels` module.  Set HEATBATH_PURE=1 to force the fallback (used by the
benchmark and by tests that exercise both lanes).
"""
import os

if os.environ.get("HEATBATH_PURE") == "1":
    from . import _pykernels as _impl
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _pykernels as _impl

COMPILED = _impl.COMPILED
csr_apply = _impl.csr_apply
l1_diff = _impl.l1_diff
sq_l2_diff = _impl.sq_l2_diff
