"""Cross-lingual joint intent detection and slot filling, from scratch on numpy.

Training-time soft word alignment transfers slot supervision from a source
language onto machine-translated (or synthetic pseudo-language) target text;
inference never uses the alignment machinery.  Hot kernels are numba-jitted
with a pure-numpy fallback (XLNLU_NUMBA=0).
"""

__version__ = "0.1.0"

from .tensor import Tensor, Tape, apply, backward  # noqa: F401
from .optim import AdamState, adam_step  # noqa: F401
from .gradcheck import finite_diff_check  # noqa: F401
