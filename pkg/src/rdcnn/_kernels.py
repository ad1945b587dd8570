"""Kernel dispatch: compiled extension when importable, numpy otherwise.

Set ``RDCNN_PURE_PYTHON=1`` before import to force the fallback.
"""

import os

from rdcnn import _pykernels

BACKEND = "python"

if os.environ.get("RDCNN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from rdcnn import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

dilated_conv_forward = _impl.dilated_conv_forward
dilated_conv_backward = _impl.dilated_conv_backward
polyphase_resample = _impl.polyphase_resample
gd_full_batch = _impl.gd_full_batch
