"""Exponential-cone programs for a fixed decoder.

With the decoder fixed, equivocation H(X_h|U,Z) is concave and the rate
I(X;U|Z) convex in the channel q(u|s), so both problems are solved exactly
by an interior-point conic solver.
"""
from __future__ import annotations

import logging
import warnings

import cvxpy as cp
import numpy as np
import scipy.sparse as sp

from ._problem import LN2, Problem

log = logging.getLogger(__name__)

SOLVER_OPTS = dict(tol_gap_abs=1e-11, tol_gap_rel=1e-11, tol_feas=1e-11, tol_ktratio=1e-9,
                   max_iter=400)


class ConicModel:
    """Shared expressions for one (problem, decoder) pair on the active inputs."""

    def __init__(self, prob: Problem, dec: np.ndarray):
        self.prob = prob
        self.dec = dec
        act = prob.active_s
        self.act = act
        zs = prob.active_z
        nu = dec.shape[0]
        # p(s, z) and p(h, s, z) restricted to active rows
        psz = np.zeros((prob.ns, prob.nz))
        np.add.at(psz, prob.s_of_x, prob.pxz)
        phsz = np.zeros((prob.nh, prob.ns, prob.nz))
        np.add.at(phsz, (prob.h_of_x, prob.s_of_x), prob.pxz)
        psz, phsz = psz[act][:, zs], phsz[:, act][:, :, zs]
        na, nza = act.size, zs.size

        self.q = cp.Variable((na, nu), nonneg=True)
        P = sp.csr_matrix(psz.T)                                  # (nz, ns)
        self.puz = P @ self.q                                     # (nz, nu)
        # p(h, u, z) as rows (z, h); drop identically-zero rows
        N = phsz.transpose(2, 0, 1).reshape(nza * prob.nh, na)
        rows = np.flatnonzero(N.sum(axis=1) > 0)
        Ex = sp.csr_matrix((np.ones(rows.size), (np.arange(rows.size), rows // prob.nh)),
                           shape=(rows.size, nza))
        self.equiv = -cp.sum(cp.rel_entr(sp.csr_matrix(N[rows]) @ self.q, Ex @ self.puz)) / LN2
        # I(S;U|Z) = sum p(s,z) q(u|s) log(q(u|s) / p(u|z))
        zi, si = np.nonzero(psz.T)
        w = psz.T[zi, si]
        A = sp.csr_matrix((w, (np.arange(w.size), si)), shape=(w.size, na))
        B = sp.csr_matrix((w / prob.pz[zs][zi], (np.arange(w.size), zi)), shape=(w.size, nza))
        self.rate = cp.sum(cp.rel_entr(A @ self.q, B @ self.puz)) / LN2
        self.dbar = [t[act] for t in prob.dbar(dec)]
        self.cons = [cp.sum(self.q, axis=1) == 1]

    def distortion(self, l: int):
        return cp.sum(cp.multiply(self.dbar[l], self.q))

    def _solve(self, objective, extra) -> np.ndarray | None:
        problem = cp.Problem(objective, self.cons + extra)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)  # accuracy is re-checked by callers
                problem.solve(solver=cp.CLARABEL, **SOLVER_OPTS)
        except (cp.SolverError, ValueError, ArithmeticError) as exc:
            log.debug("conic solve failed: %s", exc)
            return None
        if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or self.q.value is None:
            log.debug("conic solve status %s", problem.status)
            return None
        q = np.zeros((self.prob.ns, self.dec.shape[0]))
        q[self.act] = self.q.value
        return self.prob.cleanup(q)

    def max_equivocation(self, D, slack: float = 0.0):
        cons = [self.distortion(l) <= D_l + slack for l, D_l in enumerate(D)]
        return self._solve(cp.Maximize(self.equiv), cons)

    def min_rate(self, D, E: float, slack: float = 0.0):
        cons = [self.distortion(l) <= D_l + slack for l, D_l in enumerate(D)]
        cons.append(self.equiv >= E - slack)
        return self._solve(cp.Minimize(self.rate), cons)
