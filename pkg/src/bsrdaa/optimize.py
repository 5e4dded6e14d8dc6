"""Nelder-Mead simplex search written as an ask/tell generator.

The beam-steering baselines pay one loop time per objective evaluation, so
the search must hand control back to the simulator between evaluations.
:func:`nelder_mead_search` yields each candidate point and expects the
objective value through ``send``; :func:`nelder_mead_optimize` is the
ordinary call-a-function wrapper.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class NelderMeadOptions:
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    initial_edge: float = 0.5
    xtol: float = 1e-8
    # optional extra stop condition on the spread of simplex values
    ftol: float | None = None
    max_iter: int = 1000

    def __post_init__(self):
        if not (self.reflection > 0 and self.expansion > max(1.0, self.reflection)):
            raise ValueError("need reflection > 0 and expansion > max(1, reflection)")
        if not (0 < self.contraction < 1 and 0 < self.shrink < 1):
            raise ValueError("contraction and shrink must lie in (0, 1)")
        if not self.initial_edge > 0:
            raise ValueError("initial_edge must be positive")


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fun: float
    n_iter: int
    n_eval: int
    converged: bool
    best_trace: list = field(default_factory=list)


def nelder_mead_search(x0, options=None):
    """Generator: yields candidate points, receives their objective values.

    Returns a :class:`NelderMeadResult` as the ``StopIteration`` value.
    ``best_trace`` holds the best value after each iteration.
    """
    opt = options or NelderMeadOptions()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    n = x0.size
    simplex = [x0]
    for i in range(n):
        v = x0.copy()
        v[i] += opt.initial_edge
        simplex.append(v)
    fvals = []
    for v in simplex:
        fvals.append(float((yield v.copy())))
    n_eval = n + 1
    sim = np.array(simplex)
    fs = np.array(fvals)
    trace = []
    it = 0
    converged = False
    while True:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        diam = np.max(np.abs(sim[1:] - sim[0])) if n else 0.0
        spread = np.max(np.abs(fs[1:] - fs[0])) if n else 0.0
        if diam <= opt.xtol and (opt.ftol is None or spread <= opt.ftol):
            converged = True
            break
        if it >= opt.max_iter:
            break
        it += 1
        centroid = sim[:-1].mean(axis=0)
        worst = sim[-1]
        xr = centroid + opt.reflection * (centroid - worst)
        fr = float((yield xr.copy()))
        n_eval += 1
        if fr < fs[0]:
            xe = centroid + opt.expansion * (xr - centroid)
            fe = float((yield xe.copy()))
            n_eval += 1
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
        elif fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
        else:
            if fr < fs[-1]:
                xc = centroid + opt.contraction * (xr - centroid)
                fc = float((yield xc.copy()))
                n_eval += 1
                accept = fc <= fr
            else:
                xc = centroid + opt.contraction * (worst - centroid)
                fc = float((yield xc.copy()))
                n_eval += 1
                accept = fc < fs[-1]
            if accept:
                sim[-1], fs[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    sim[i] = sim[0] + opt.shrink * (sim[i] - sim[0])
                    fs[i] = float((yield sim[i].copy()))
                    n_eval += 1
        trace.append(float(min(fs.min(), trace[-1] if trace else np.inf)))
    return NelderMeadResult(sim[0].copy(), float(fs[0]), it, n_eval, converged, trace)


def nelder_mead_optimize(objective, x0, options=None):
    """Minimize ``objective`` from ``x0``; returns a :class:`NelderMeadResult`."""
    gen = nelder_mead_search(x0, options)
    try:
        x = next(gen)
        while True:
            x = gen.send(objective(x))
    except StopIteration as stop:
        return stop.value
