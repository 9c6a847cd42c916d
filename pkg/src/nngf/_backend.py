"""Import-time selection between the compiled kernels and the numpy fallback.

Set ``NNGF_BACKEND=python`` to force the fallback even when the extension
is built.
"""
import os

from nngf import _pykernels

_impl = _pykernels
NAME = "python"

if os.environ.get("NNGF_BACKEND", "").lower() != "python":
    try:
        from nngf import _ckernels

        _impl = _ckernels
        NAME = "cython"
    except ImportError:
        pass

PARITY_NONE = _pykernels.PARITY_NONE
PARITY_EVEN = _pykernels.PARITY_EVEN
PARITY_ODD = _pykernels.PARITY_ODD

relu_complement = _impl.relu_complement
relu_value = _impl.relu_value
series_value = _impl.series_value
series_complement = _impl.series_complement
iterate_series = _impl.iterate_series
iterate_series_anchored = _impl.iterate_series_anchored
iterate_relu = _impl.iterate_relu
gegenbauer_table = _impl.gegenbauer_table
legendre_table = _impl.legendre_table
hermite_table = _impl.hermite_table


def implementations():
    """Return the available backends as a name -> module mapping."""
    out = {"python": _pykernels}
    try:
        from nngf import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
