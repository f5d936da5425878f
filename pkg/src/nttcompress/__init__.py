"""Two-stage compression of distribution tensors into positive tensor trains.

Stage one builds an unconstrained tensor train from an entry oracle
(:func:`tt_cross_run`) or from samples (:func:`tt_sketch_run`). Stage two
fits a strictly positive tensor train to it (:func:`ntt_fit_run`).
"""

from .errors import (
    DegenerateInputError,
    DomainError,
    FitAborted,
    InvalidArgumentError,
    NTTError,
    NumericalBreakdownError,
    StaleCacheError,
    StalledLineSearchError,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .ntt_fit import (
    AdaptiveSchedule,
    FitOptions,
    FitTrace,
    FixedSchedule,
    multiplicative_update_run,
    ntt_fit_run,
    warm_init,
)
from .stage_one import ClusterSketch, EntryOracle, PivotSketch, RandomProductSketch, tt_cross_run, tt_sketch_run
from .tensor_core import (
    NonNegTensorTrain,
    TensorTrain,
    ntt_sample,
    tt_eval,
    tt_eval_batch,
    tt_inner,
    tt_sum,
)

__version__ = "0.1.0"
