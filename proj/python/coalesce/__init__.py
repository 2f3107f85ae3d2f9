"""Smooth eigendecompositions of parametric SPD pencils and conical-intersection search."""

import json as _json

from . import _coalesce
from ._coalesce import (
    CoalesceError,
    cholesky,
    decode_signature,
    eig2x2,
    fit_power_law,
    gen_eig,
    sgplus_matrices,
    signature_from_counts,
    spd_sqrt,
    spd_sqrt_series,
    sqrt_derivative,
)

__version__ = _coalesce.__version__


def _spec(obj):
    return obj if isinstance(obj, str) else _json.dumps(obj)


def pencil_eval(pencil, x, y):
    """(A, B) at the point (x, y); pencil is a spec dict."""
    return _coalesce.pencil_eval(_spec(pencil), x, y)


def trace(pencil, loop, h0=1.0 / 64.0):
    """Continue the decomposition along a loop or segment spec."""
    return _coalesce.trace(_spec(pencil), _spec(loop), h0)


def sweep(pencil, grid, workers=1, retry_seed=None):
    """Box sweep; returns the summary dict (pair totals, CI rows, failures)."""
    args = [_spec(pencil), _spec(grid), workers]
    if retry_seed is not None:
        args.append(retry_seed)
    return _json.loads(_coalesce.sweep(*args))


def refine(pencil, box, depth):
    """Refine a flagged box (x_lo, x_hi, y_lo, y_hi); list of (x, y, uncertainty, pair)."""
    return _coalesce.refine(_spec(pencil), list(box), depth)


def census(spec, out_dir, workers=1):
    """Run an experiment spec; outputs land in out_dir. Returns the fits."""
    return _coalesce.census(_spec(spec), str(out_dir), workers)


__all__ = [
    "CoalesceError",
    "census",
    "cholesky",
    "decode_signature",
    "eig2x2",
    "fit_power_law",
    "gen_eig",
    "pencil_eval",
    "refine",
    "sgplus_matrices",
    "signature_from_counts",
    "spd_sqrt",
    "spd_sqrt_series",
    "sqrt_derivative",
    "sweep",
    "trace",
]
