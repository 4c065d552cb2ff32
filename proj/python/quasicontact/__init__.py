"""Marked continuous contact model: mark-space eigendata, stationary pair
correlations, the first two correlation equations, and an exact simulator."""

from ._quasicontact import *  # noqa: F401,F403
from ._quasicontact import __version__, run, simulate

import numpy as _np


def replica_density(result):
    """Mean whole-torus density and its standard error at each sample time
    of a `simulate` result."""
    totals = _np.asarray(result["counts"]).sum(axis=2) / result["volume"]
    n = totals.shape[0]
    err = totals.std(axis=0, ddof=1) / _np.sqrt(n) if n > 1 else _np.full(totals.shape[1], _np.nan)
    return totals.mean(axis=0), err
