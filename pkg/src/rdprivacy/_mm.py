"""Multiplier searches around the majorize-minimize channel kernel.

Single distortion constraint only. The distortion multiplier is searched on a
log scale; the equivocation weight ``beta`` of R(D,E) in an outer search.
Each level finishes by time-sharing its two bracketing channels, which keeps
distortion linear, equivocation concave and rate convex in our favour.
"""
from __future__ import annotations

import math

import numpy as np

from . import _kernels
from ._problem import Problem
from ._search import Probe, illinois


class MMSolver:
    def __init__(self, prob: Problem, dec: np.ndarray, tol: float = 1e-13,
                 max_iter: int = 200_000):
        if prob.L != 1:
            raise ValueError("the MM path handles a single distortion constraint")
        self.prob = prob
        self.dec = dec
        self.tol = tol
        self.max_iter = max_iter
        self.dbar = prob.dbar(dec)[0]
        ps = np.where(prob.ps > 0, prob.ps, 1.0)
        self.dcond = self.dbar / ps[:, None]
        self.q = np.full((prob.ns, dec.shape[0]), 1.0 / dec.shape[0])
        self.iterations = 0

    def _run(self, alpha: float, mu: float) -> np.ndarray:
        p = self.prob
        q0 = 0.999 * self.q + 0.001 / self.q.shape[1]
        q, it = _kernels.mm_solve(p.pxz, p.s_of_x, p.h_of_x, p.ns, p.nh, mu * self.dcond,
                                  alpha, q0, self.tol, self.max_iter)
        self.iterations += int(it)
        self.q = q
        return q

    def distortion(self, q) -> float:
        return float((self.dbar * q).sum())

    def at_distortion(self, alpha: float, D: float):
        """Channel minimizing the weighted leakage with distortion exactly <= D, or None."""
        def f(t):
            q = self._run(alpha, math.exp(t))
            return Probe(t, self.distortion(q) - D, q)

        first = f(0.0)
        lo = hi = None
        if first.g <= 0:
            lo = first
            while hi is None:
                pr = f(lo.t - 2.0)
                if pr.g > 0:
                    hi = pr
                elif pr.t < -25:
                    return pr.payload
                else:
                    lo = pr
        else:
            hi = first
            while lo is None:
                pr = f(hi.t + 2.0)
                if pr.g <= 0:
                    lo = pr
                elif pr.t > 25:
                    return None
                else:
                    hi = pr
        lo, hi = illinois(f, lo, hi, xtol=1e-12, ftol=1e-12, max_eval=120)
        return _mix_to(lo.payload, hi.payload, self.distortion(lo.payload),
                       self.distortion(hi.payload), D)


def _mix_to(q_lo, q_hi, v_lo, v_hi, target):
    """Convex combination of two channels whose linear statistic hits ``target``."""
    if v_lo == v_hi or not (min(v_lo, v_hi) < target < max(v_lo, v_hi)):
        return q_lo
    theta = (v_hi - target) / (v_hi - v_lo)
    return theta * q_lo + (1.0 - theta) * q_hi


def mm_gamma(prob: Problem, dec: np.ndarray, **kw) -> np.ndarray | None:
    return MMSolver(prob, dec, **kw).at_distortion(0.0, prob.D[0])


def mm_rate(prob: Problem, dec: np.ndarray, E: float, **kw) -> np.ndarray | None:
    solver = MMSolver(prob, dec, **kw)
    D = prob.D[0]

    def f(beta):
        q = solver.at_distortion(1.0 - beta, D)
        if q is None:
            return None
        return Probe(beta, E - prob.evaluate(q, dec)[1], q)

    start = f(0.0)
    if start is None:
        return None
    if start.g <= 0:
        return start.payload
    top = f(1.0)
    if top is None or top.g > 1e-9:
        return None
    lo, hi = illinois(f, top, start, xtol=1e-12, ftol=1e-10, max_eval=80)
    # equivocation is concave, so matching it linearly stays feasible
    return _mix_to(lo.payload, hi.payload, E - lo.g, E - hi.g, E)
