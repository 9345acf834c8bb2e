"""Value-iteration sweep kernels.

The Gauss-Seidel sweep is the numeric hot loop of the checker.  It ships in
two builds with identical arithmetic: a numba-compiled kernel and a plain
NumPy/Python fallback.  Selection: set TICKGRAPH_NUMBA=0 to force the
fallback; otherwise numba is used when importable.  Both produce bitwise
identical results (same operations in the same order), so the switch only
affects speed; ``bench/bench_value_iteration.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np


def _sweep(values, fixed, minimize, choice_ptr, trans_ptr, targets, probs):
    """One in-place Gauss-Seidel sweep in state order; returns max |change|.

    States are fixed (precomputed) or updated to the best one-step value over
    their choices; states without choices are absorbing and keep their value.
    """
    delta = 0.0
    for s in range(values.shape[0]):
        if fixed[s]:
            continue
        c0, c1 = choice_ptr[s], choice_ptr[s + 1]
        if c0 == c1:
            continue
        best = 0.0
        first = True
        for c in range(c0, c1):
            acc = 0.0
            for k in range(trans_ptr[c], trans_ptr[c + 1]):
                acc += probs[k] * values[targets[k]]
            if first:
                best = acc
                first = False
            elif minimize:
                if acc < best:
                    best = acc
            else:
                if acc > best:
                    best = acc
        d = best - values[s]
        if d < 0.0:
            d = -d
        if d > delta:
            delta = d
        values[s] = best
    return delta


_BACKEND = "python"
sweep = _sweep

if os.environ.get("TICKGRAPH_NUMBA", "1").lower() not in ("0", "false", "off"):
    try:
        from numba import njit

        sweep = njit(cache=True)(_sweep)
        _BACKEND = "numba"
    except ImportError:
        pass


def backend() -> str:
    return _BACKEND


def python_sweep():
    """The uncompiled kernel, for benchmarks and equivalence tests."""
    return _sweep


def as_arrays(choices_per_state):
    """Flatten per-state choices into the CSR-style arrays the kernel wants."""
    choice_ptr = [0]
    trans_ptr = [0]
    targets: list[int] = []
    probs: list[float] = []
    for cs in choices_per_state:
        for _action, dist in cs:
            for t, p in dist:
                targets.append(t)
                probs.append(p)
            trans_ptr.append(len(targets))
        choice_ptr.append(len(trans_ptr) - 1)
    return (
        np.asarray(choice_ptr, dtype=np.int64),
        np.asarray(trans_ptr, dtype=np.int64),
        np.asarray(targets, dtype=np.int64),
        np.asarray(probs, dtype=np.float64),
    )
