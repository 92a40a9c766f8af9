"""Hot metric kernels.

Two interchangeable implementations live here: ``_numba`` (compiled loops)
and ``_numpy`` (vectorised). The numba path is used when numba imports and
the environment variable ``SPIRAL_SIM_NUMBA`` is not set to ``0``.
"""
import os

from . import _numpy

_impl = _numpy
BACKEND = "numpy"

if os.environ.get("SPIRAL_SIM_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off"):
    try:
        from . import _numba
    except ImportError:  # numba missing: stay on numpy
        pass
    else:
        _impl = _numba
        BACKEND = "numba"

mk_s = _impl.mk_s
tie_group_sizes = _impl.tie_group_sizes
average_ranks = _impl.average_ranks
pearson = _impl.pearson
cumulative_mco = _impl.cumulative_mco
excess_kurtosis = _impl.excess_kurtosis
quantile_linear = _impl.quantile_linear
prefix_means = _impl.prefix_means


def implementations():
    """Return ``{name: module}`` for every kernel backend importable here."""
    out = {"numpy": _numpy}
    try:
        from . import _numba as nb
    except ImportError:
        return out
    out["numba"] = nb
    return out
