"""Two-stage successive disclosure for single-attribute sources.

A coarse answer at (D_1, E_1) followed by a refinement to (D_2, E_2) loses
nothing when the fine test channel p(x2 | x) and a second channel
p(x1 | x2) form a Markov cascade X - X2 - X1 whose coarse end still
achieves R(D_1). The checker builds that cascade constructively.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .errors import (InfeasibleDistortionError, InfeasiblePrivacyError, OrderingError, PlanStateError,
                     UnsupportedModelError, ValidationError)
from .prob import Channel, JointPmf, entropy
from .rd import DistortionMatrix, mutual_information_bits, rate_distortion

RATE_TOL = 1e-4       # equality test I(X; X1) = R(D_1)
PRIVACY_SLACK = 1e-4  # targets are typically quoted to four decimals
DIST_TOL = 1e-6


@dataclass
class StagePlan:
    """Cascade X -> X2 (fine) -> X1 (coarse) with its stage rates.

    ``rates`` is (R_0, R_1): R_1 = I(X; X1) answers the coarse query and
    R_0 is the refinement increment.
    """

    stage_targets: tuple
    fine_channel: Channel
    refinement_channel: Channel
    rates: tuple
    feasible: bool
    equivocations: tuple = (math.nan, math.nan)
    distortions: tuple = (math.nan, math.nan)
    meta: dict = field(default_factory=dict)

    def coarse_channel(self) -> Channel:
        """Composed p(x1 | x)."""
        a = self.fine_channel.matrix() @ self.refinement_channel.matrix()
        return Channel(self.fine_channel.input_axes, self.refinement_channel.output_axes, a,
                       tol=1e-9)

    @property
    def crossover(self) -> float:
        """Refinement flip probability (meaningful for binary alphabets)."""
        W = self.refinement_channel.matrix()
        return float(W[0, 1]) if W.shape == (2, 2) else math.nan

    def to_dict(self) -> dict:
        return {
            "coarse": list(self.stage_targets[0]),
            "fine": list(self.stage_targets[1]),
            "feasible": self.feasible,
            "R0": self.rates[0],
            "R1": self.rates[1],
            "equivocation": list(self.equivocations),
            "distortion": list(self.distortions),
            "fine_channel": self.fine_channel.matrix().tolist(),
            "refinement_channel": self.refinement_channel.matrix().tolist(),
            "meta": self.meta,
        }


def _prior_vector(prior: JointPmf) -> np.ndarray:
    if len(prior.axes) != 1:
        raise UnsupportedModelError("successive disclosure is implemented for one attribute")
    return prior.mass.ravel()


def _min_coarse_rate(p, Q2, d, D1):
    """min over W of I(X; X1) with X1 drawn from X2 by W and E d(X, X1) <= D1."""
    n2, n1 = Q2.shape[1], d.shape[1]
    W = cp.Variable((n2, n1), nonneg=True)
    pxx1 = cp.multiply(p[:, None], Q2) @ W               # p(x, x1)
    p1 = cp.sum(pxx1, axis=0)
    outer = np.ones((p.size, 1)) @ cp.reshape(p1, (1, n1), order="C")
    rate = cp.sum(cp.rel_entr(pxx1, cp.multiply(p[:, None], outer)))
    cons = [cp.sum(W, axis=1) == 1, cp.sum(cp.multiply(pxx1, d)) <= D1]
    prob = cp.Problem(cp.Minimize(rate), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.SolverError:
        return None
    if W.value is None:
        return None
    Wv = np.clip(W.value, 0, None)
    return Wv / Wv.sum(axis=1, keepdims=True)


def check_successive(prior: JointPmf, d, coarse, fine, tol: float = RATE_TOL) -> StagePlan:
    """Search a cascade realizing both stages without rate loss."""
    p = _prior_vector(prior)
    d = d if isinstance(d, DistortionMatrix) else DistortionMatrix(np.asarray(d, float))
    (D1, E1), (D2, E2) = (tuple(map(float, coarse)), tuple(map(float, fine)))
    if not D2 < D1:
        raise OrderingError(f"fine distortion {D2} must be below coarse distortion {D1}")
    if min(D1, D2, E1, E2) < 0:
        raise ValidationError("stage targets must be non-negative")
    H = entropy(prior)
    fine_pt = rate_distortion(prior, d, D2)
    coarse_pt = rate_distortion(prior, d, D1)
    gammas = (H - coarse_pt.R, H - fine_pt.R)
    for k, (E, g) in enumerate(zip((E1, E2), gammas), start=1):
        if E > g + PRIVACY_SLACK:
            raise InfeasiblePrivacyError(f"stage {k}: E={E} exceeds maximal equivocation {g:.6f}")

    Q2 = fine_pt.channel.matrix()
    p2 = p @ Q2
    # E[d(X, x1) | X2 = x2] under the fine channel
    post = (p[:, None] * Q2) / np.where(p2 > 0, p2, 1.0)[None, :]
    d_eff = post.T @ d.values
    x_axis = prior.axes[0]
    out2 = d.output_alphabet().renamed(f"{x_axis.name}_fine")
    out1 = d.output_alphabet().renamed(f"{x_axis.name}_coarse")

    def score(W):
        Q1 = Q2 @ W
        return mutual_information_bits(p, Q1), float(p @ (Q1 * d.values).sum(axis=1))

    try:
        stage1 = rate_distortion(JointPmf([out2], p2, tol=1e-9), d_eff, D1)
        W = stage1.channel.matrix()
        R1, dist1 = score(W)
    except InfeasibleDistortionError:
        # X2 may not support D1 at all; leave it to the conic search
        W = np.full((Q2.shape[1], d.values.shape[1]), 1.0 / d.values.shape[1])
        R1, dist1 = score(W)
    method = "blahut-arimoto"
    if abs(R1 - coarse_pt.R) > tol or dist1 > D1 + DIST_TOL:
        W_cvx = _min_coarse_rate(p, Q2, d.values, D1)
        if W_cvx is not None:
            R1c, dist1c = score(W_cvx)
            if dist1c <= D1 + DIST_TOL and (R1c < R1 or dist1 > D1 + DIST_TOL):
                W, R1, dist1, method = W_cvx, R1c, dist1c, "conic"
    R2 = mutual_information_bits(p, Q2)
    dist2 = float(p @ (Q2 * d.values).sum(axis=1))
    feasible = abs(R1 - coarse_pt.R) <= tol and dist1 <= D1 + DIST_TOL
    fine_ch = Channel([x_axis], [out2], Q2, tol=1e-9)
    refine_ch = Channel([out2], [out1], W, tol=1e-9)
    return StagePlan(((D1, E1), (D2, E2)), fine_ch, refine_ch, (R2 - R1, R1), feasible,
                     equivocations=(H - R1, H - R2), distortions=(dist1, dist2),
                     meta={"R_D1": coarse_pt.R, "R_D2": fine_pt.R, "rate_gap": R1 - coarse_pt.R,
                           "stage1_method": method, "tolerance": tol})


def disclosure_rates(plan: StagePlan, prior: JointPmf) -> tuple[float, float]:
    """(R_0, R_1) recomputed from the stored cascade."""
    if not plan.feasible:
        raise PlanStateError("disclosure rates are defined only for feasible plans")
    p = _prior_vector(prior)
    Q2 = plan.fine_channel.matrix()
    R2 = mutual_information_bits(p, Q2)
    R1 = mutual_information_bits(p, Q2 @ plan.refinement_channel.matrix())
    return R2 - R1, R1
